use std::fmt::Write as _;
use std::path::Path;

use super::io::write_atomic;
use super::Scene;
use crate::error::{Error, Result};

/// Deterministic colour for a mask id; `-1` (no mask) is grey.
pub fn label_color(label: i32) -> [u8; 3] {
    if label < 0 {
        return [128, 128, 128];
    }
    let mut h = (label as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    [
        (h & 0xFF) as u8 | 0x20,
        ((h >> 8) & 0xFF) as u8 | 0x20,
        ((h >> 16) & 0xFF) as u8 | 0x20,
    ]
}

/// ASCII PLY text with vertices coloured by `labels`.
pub fn ply_string(scene: &Scene, labels: &[i32]) -> Result<String> {
    if labels.len() != scene.len() {
        return Err(Error::dims(format!(
            "{} labels for {} points",
            labels.len(),
            scene.len()
        )));
    }
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\ncomment scene {}\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nproperty int label\nend_header\n",
        scene.scene_id,
        scene.len()
    );
    for (p, &l) in scene.points.iter().zip(labels) {
        let c = label_color(l);
        let _ = writeln!(s, "{} {} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2], l);
    }
    Ok(s)
}

pub fn export_ply(scene: &Scene, labels: &[i32], path: &Path) -> Result<()> {
    write_atomic(path, ply_string(scene, labels)?.as_bytes())
}
