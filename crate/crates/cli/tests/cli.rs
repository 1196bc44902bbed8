use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fobj_core::evalap::{gt_masks_of, Prediction};
use fobj_core::policynet::PolicySet;
use fobj_core::scenegraph::io::list_scene_files;
use fobj_core::scenegraph::load_scene;
use serde_json::Value;

const CONFIG: &str = "epochs = 2\ndiscover_rollouts = 2\n[ppo]\nbank_warmup_rollouts = 4\n";

fn fobj(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fobj"))
        .current_dir(dir)
        .env("FOBJ_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = fobj(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup(n: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), CONFIG).unwrap();
    ok(
        dir.path(),
        &["gen", "--spec", "cfg.toml", "--out", "scenes", "--n", n, "--seed", "3"],
    );
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eval_of_ground_truth_masks_is_perfect() {
    let dir = setup("2");
    let mut preds = Vec::new();
    for f in list_scene_files(&dir.path().join("scenes")).unwrap() {
        let s = load_scene(&f).unwrap();
        for m in gt_masks_of(&s) {
            preds.push(Prediction {
                scene_id: s.scene_id.clone(),
                points: m,
                confidence: 1.0,
            });
        }
    }
    assert!(!preds.is_empty());
    fs::write(dir.path().join("gt.json"), serde_json::to_string(&preds).unwrap()).unwrap();
    ok(
        dir.path(),
        &[
            "eval", "--pred", "gt.json", "--scenes", "scenes", "--out", "ev.json", "--csv", "ev.csv",
        ],
    );
    let r = json(&dir.path().join("ev.json"));
    for k in ["ap", "ap50", "ap25"] {
        assert_eq!(r[k].as_f64().unwrap(), 1.0, "{k}");
    }
    assert!(fs::read_to_string(dir.path().join("ev.csv"))
        .unwrap()
        .starts_with("ap,ap50,ap25"));
    assert!(dir.path().join("ev.json.manifest.json").is_file());
}

#[test]
fn zero_epoch_training_saves_the_initialisation() {
    let dir = setup("2");
    let args = ["train", "--scenes", "scenes", "--config", "cfg.toml", "--out"];
    ok(dir.path(), &[&args[..], &["a", "--epochs", "0"]].concat());
    ok(dir.path(), &[&args[..], &["b", "--epochs", "0"]].concat());
    let a = fs::read(dir.path().join("a/policy.bin")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("a/checkpoints/epoch_0000.bin")).unwrap());
    assert_eq!(a, fs::read(dir.path().join("b/policy.bin")).unwrap());
    PolicySet::<f32>::from_bytes(&a).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("a/metrics.jsonl")).unwrap(), "");
    let m = json(&dir.path().join("a/manifest.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["seed"], 0);
}

#[test]
fn training_is_reproducible_and_feeds_the_rest_of_the_pipeline() {
    let dir = setup("2");
    let d = dir.path();
    for out in ["a", "b"] {
        ok(
            d,
            &[
                "train",
                "--scenes",
                "scenes",
                "--config",
                "cfg.toml",
                "--out",
                out,
                "--checkpoint-every",
                "1",
            ],
        );
    }
    for f in ["policy.bin", "metrics.jsonl", "checkpoints/epoch_0002.bin"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        fs::read_to_string(d.join("a/metrics.jsonl")).unwrap().lines().count(),
        2
    );
    assert_eq!(fs::read_dir(d.join("a/banks")).unwrap().count(), 2);

    ok(
        d,
        &[
            "discover",
            "--scenes",
            "scenes",
            "--policies",
            "a",
            "--rollouts",
            "2",
            "--out",
            "pred.json",
        ],
    );
    let preds: Vec<Prediction> = serde_json::from_value(json(&d.join("pred.json"))).unwrap();
    assert!(preds.iter().all(|p| !p.points.is_empty()));

    ok(
        d,
        &[
            "eval",
            "--pred",
            "pred.json",
            "--scenes",
            "scenes",
            "--clean",
            "--out",
            "ev.json",
        ],
    );
    let r = json(&d.join("ev.json"));
    assert!(r["cleaned"]["ap50"].as_f64().unwrap() >= r["raw"]["ap50"].as_f64().unwrap());

    ok(
        d,
        &[
            "eval",
            "--pred",
            "a/pseudo/scene_0000.json",
            "--scenes",
            "scenes",
            "--out",
            "one.json",
        ],
    );
    ok(
        d,
        &["eval", "--pred", "a/pseudo", "--scenes", "scenes", "--out", "all.json"],
    );
    ok(
        d,
        &[
            "stats",
            "--banks",
            "a/pseudo",
            "--scenes",
            "scenes",
            "--checkpoints",
            "1,2",
            "--out",
            "stats.csv",
        ],
    );
    let csv = fs::read_to_string(d.join("stats.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    ok(
        d,
        &[
            "export-ply",
            "--scenes",
            "scenes",
            "--pred",
            "pred.json",
            "--out",
            "ply",
        ],
    );
    let ply = fs::read_to_string(d.join("ply/scene_0000.ply")).unwrap();
    assert!(ply.starts_with("ply\n"));
}

#[test]
fn superpoints_cover_every_point() {
    let dir = setup("1");
    ok(
        dir.path(),
        &[
            "superpoints",
            "--scenes",
            "scenes",
            "--config",
            "cfg.toml",
            "--out",
            "sp",
        ],
    );
    let p = json(&dir.path().join("sp/scene_0000.json"));
    let k = p["k"].as_u64().unwrap();
    let sizes: u64 = p["sizes"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    let assignment = p["assignment"].as_array().unwrap();
    assert_eq!(sizes as usize, assignment.len());
    assert!(assignment.iter().all(|a| a.as_u64().unwrap() < k));
}

#[test]
fn oracle_features_reproduce_the_stored_ones() {
    let dir = setup("2");
    let args = [
        "train", "--scenes", "scenes", "--config", "cfg.toml", "--epochs", "1", "--out",
    ];
    ok(dir.path(), &[&args[..], &["files", "--feat-files"]].concat());
    ok(dir.path(), &[&args[..], &["oracle", "--oracle-features"]].concat());
    assert_eq!(
        fs::read(dir.path().join("files/policy.bin")).unwrap(),
        fs::read(dir.path().join("oracle/policy.bin")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = setup("1");
    let d = dir.path();
    assert_eq!(fobj(d, &["eval", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        fobj(
            d,
            &[
                "eval",
                "--pred",
                "missing.json",
                "--scenes",
                "scenes",
                "--out",
                "x.json"
            ]
        )
        .status
        .code(),
        Some(3)
    );
    fs::write(d.join("bad.toml"), "epochs = \"many\"\n").unwrap();
    assert_eq!(
        fobj(
            d,
            &["train", "--scenes", "scenes", "--config", "bad.toml", "--out", "r"]
        )
        .status
        .code(),
        Some(2)
    );
    assert!(!d.join("r").exists());
    fs::write(d.join("junk.json"), "not json").unwrap();
    assert_eq!(
        fobj(
            d,
            &["eval", "--pred", "junk.json", "--scenes", "scenes", "--out", "x.json"]
        )
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        fobj(d, &["center-train", "--out", "c.bin", "--samples", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fobj(
            d,
            &[
                "train",
                "--scenes",
                "scenes",
                "--config",
                "cfg.toml",
                "--out",
                "r",
                "--oracle-features",
                "--feat-files"
            ]
        )
        .status
        .code(),
        Some(2)
    );
}
