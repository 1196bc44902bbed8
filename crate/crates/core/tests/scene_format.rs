use std::collections::BTreeMap;
use std::path::PathBuf;

use fobj_core::scenegraph::io::{encode_scene, read_meta};
use fobj_core::scenegraph::{load_scene, save_scene, save_scene_with_meta, Scene};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/three_points.fobj")
}

fn golden_scene() -> Scene {
    Scene::new(
        "three_points",
        vec![[0.0, 0.5, 1.0], [-1.25, 2.0, 0.125], [3.5, -0.75, 0.0]],
        vec![[255, 0, 0], [0, 128, 255], [10, 20, 30]],
        vec![-1, 0, 0],
    )
    .unwrap()
    .with_features(2, vec![0.5, -1.0, 0.25, 2.0, -0.125, 0.0])
    .unwrap()
}

#[test]
fn encoder_reproduces_the_golden_bytes() {
    let golden = std::fs::read(golden_path()).unwrap();
    assert_eq!(golden.len(), 16 + 3 * 12 + 3 * 3 + 3 * 8 + 3 * 4);
    assert_eq!(encode_scene(&golden_scene()).unwrap(), golden);
}

#[test]
fn golden_file_loads_field_by_field() {
    let s = load_scene(&golden_path()).unwrap();
    let want = golden_scene();
    assert_eq!(s.scene_id, "three_points");
    assert_eq!(s.points, want.points);
    assert_eq!(s.colors, want.colors);
    assert_eq!(s.feat_dim, 2);
    assert_eq!(
        s.features.iter().map(|f| f.to_bits()).collect::<Vec<_>>(),
        want.features.iter().map(|f| f.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(s.instances, want.instances);
}

#[test]
fn save_then_load_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.fobj");
    save_scene(&golden_scene(), &p).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(golden_path()).unwrap());
    let mut extra = BTreeMap::new();
    extra.insert("source".to_string(), "test".to_string());
    let q = dir.path().join("renamed.fobj");
    save_scene_with_meta(&golden_scene(), &q, &extra).unwrap();
    let back = load_scene(&q).unwrap();
    assert_eq!(back, golden_scene());
    assert_eq!(read_meta(&q).unwrap()["source"], "test");
}
