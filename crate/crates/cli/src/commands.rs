use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fobj_core::config::EngineConfig;
use fobj_core::discovery::{PseudoMaskBank, SceneMasks};
use fobj_core::evalap::{clean_pseudo_labels, discovery_stats, evaluate_ap, EvalReport, Prediction};
use fobj_core::geomreward::{train_center_regressor, CenterRegressor, RegressorTrainConfig, SamplerConfig};
use fobj_core::policynet::PolicySet;
use fobj_core::ppo::{metrics_jsonl, train, CenterSource, SceneState};
use fobj_core::rng::rng_from;
use fobj_core::scenegraph::io::{list_scene_files, read_meta};
use fobj_core::scenegraph::{build_partition, export_ply, load_scene, save_scene_with_meta, Scene};
use fobj_core::suite::{
    discover_all, ground_truth, init_policies, prepare_states, run_benchmark, synthetic_features, BenchmarkConfig,
};
use fobj_core::synth::{gen_center_training_set, gen_scenes, parse_classes, Archetype};
use fobj_core::{par, Error};
use log::info;
use serde::Serialize;

use crate::manifest::{manifest_path, write_atomic, RunManifest};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| CliError::Core(Error::Io(e)))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    write(path, text.as_bytes())
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Core(Error::Io(e)))
}

fn finish(m: &RunManifest, out: &Path, is_dir: bool) -> Result<()> {
    m.write(&manifest_path(out, is_dir))
        .map_err(|e| CliError::Core(Error::Io(e)))
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => Ok(EngineConfig::load(p)?),
        None => Ok(EngineConfig::default()),
    }
}

fn snapshot(cfg: &EngineConfig) -> Result<Option<String>> {
    Ok(Some(cfg.to_toml()?))
}

/// Where semantic features come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Features {
    /// Regenerated from each scene's class list.
    Oracle,
    /// Whatever feature block the scene files carry.
    Files,
}

fn load_scenes(dir: &Path, features: Features, cfg: &EngineConfig) -> Result<Vec<Scene>> {
    let files = list_scene_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Core(Error::Format(format!(
            "no .fobj scene files in {}",
            dir.display()
        ))));
    }
    let loaded = par::map(&files, |_, f| -> fobj_core::Result<Scene> {
        let scene = load_scene(f)?;
        if features == Features::Files {
            return Ok(scene);
        }
        let meta = read_meta(f)?;
        let get = |k: &str| {
            meta.get(k).ok_or_else(|| {
                Error::Format(format!(
                    "{}: sidecar lacks `{k}` needed for oracle features",
                    f.display()
                ))
            })
        };
        let classes = parse_classes(get("classes")?)?;
        let seed = get("feature_seed")?
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad feature_seed", f.display())))?;
        let index = get("index")?
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad index", f.display())))?;
        synthetic_features(scene, &classes, &cfg.features, seed, index)
    });
    Ok(loaded.into_iter().collect::<fobj_core::Result<_>>()?)
}

fn center_source(ckpt: Option<&Path>) -> Result<CenterSource> {
    Ok(match ckpt {
        Some(p) => CenterSource::Learned(Arc::new(CenterRegressor::<f32>::load(p)?)),
        None => CenterSource::Oracle,
    })
}

pub fn gen(spec: &Path, out: &Path, n: usize, seed: u64, first: usize, mut m: RunManifest) -> Result<()> {
    let cfg = EngineConfig::load(spec)?;
    m.seed = Some(seed);
    m.config = snapshot(&cfg)?;
    let scenes = m.stage("generate", || gen_scenes(&cfg.scene, n, seed, first))?;
    mkdir(out)?;
    let written = m.stage("write", || {
        par::map(&scenes, |i, s| -> fobj_core::Result<PathBuf> {
            let index = first + i;
            let scene = synthetic_features(s.scene.clone(), &s.classes, &cfg.features, seed, index)?;
            let (k, v) = s.meta();
            let extra: BTreeMap<String, String> = [
                (k, v),
                ("feature_seed".to_string(), seed.to_string()),
                ("index".to_string(), index.to_string()),
            ]
            .into_iter()
            .collect();
            let path = out.join(format!("{}.fobj", scene.scene_id));
            save_scene_with_meta(&scene, &path, &extra)?;
            Ok(path)
        })
    });
    for p in written {
        m.output(p?);
    }
    info!("wrote {n} scenes to {}", out.display());
    finish(&m, out, true)
}

#[derive(Serialize)]
struct PartitionFile {
    scene_id: String,
    k: usize,
    sizes: Vec<usize>,
    assignment: Vec<u32>,
    adjacency: Vec<[u32; 2]>,
}

pub fn superpoints(scenes: &Path, config: &Path, out: &Path, mut m: RunManifest) -> Result<()> {
    let cfg = EngineConfig::load(config)?;
    m.config = snapshot(&cfg)?;
    let list = load_scenes(scenes, Features::Files, &cfg)?;
    let parts = m.stage("segment", || par::map(&list, |_, s| build_partition(s, &cfg.segment)));
    mkdir(out)?;
    for (s, p) in list.iter().zip(parts) {
        let p = p?;
        let mut adjacency = Vec::new();
        for i in 0..p.k() {
            for &j in p.adjacency.neighbors(i) {
                if (i as u32) < j {
                    adjacency.push([i as u32, j]);
                }
            }
        }
        let file = PartitionFile {
            scene_id: s.scene_id.clone(),
            k: p.k(),
            sizes: p.sizes(),
            assignment: p.assignment.clone(),
            adjacency,
        };
        let path = out.join(format!("{}.json", s.scene_id));
        write_json(&path, &file)?;
        info!("{}: {} superpoints", s.scene_id, p.k());
        m.output(path);
    }
    finish(&m, out, true)
}

pub struct CenterArgs {
    pub samples: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub context: usize,
    pub lr: f64,
    pub seed: u64,
}

pub fn center_train(out: &Path, a: &CenterArgs, mut m: RunManifest) -> Result<()> {
    if a.samples == 0 || a.hidden == 0 || a.context == 0 || a.lr.is_nan() || a.lr <= 0.0 {
        return Err(CliError::Usage(
            "center-train needs positive --samples, --hidden, --context and --lr".into(),
        ));
    }
    m.seed = Some(a.seed);
    let data = m.stage("sample", || {
        gen_center_training_set(a.samples, &Archetype::ALL, &SamplerConfig::default(), a.seed)
    })?;
    let mut model = CenterRegressor::<f32>::new(a.hidden, a.context, &mut rng_from(a.seed));
    let tcfg = RegressorTrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        ..Default::default()
    };
    let curve = m.stage("train", || train_center_regressor(&data, &mut model, &tcfg))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        mkdir(dir)?;
    }
    model.save(out)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    let mut curve_path = out.as_os_str().to_owned();
    curve_path.push(".loss.csv");
    let curve_path = PathBuf::from(curve_path);
    write(&curve_path, csv.as_bytes())?;
    m.output(out);
    m.output(curve_path);
    finish(&m, out, false)
}

pub struct TrainArgs<'a> {
    pub scenes: &'a Path,
    pub config: &'a Path,
    pub out: &'a Path,
    pub center_ckpt: Option<&'a Path>,
    pub features: Features,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub checkpoint_every: usize,
}

pub fn train_cmd(a: &TrainArgs<'_>, mut m: RunManifest) -> Result<()> {
    let mut cfg = EngineConfig::load(a.config)?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    m.seed = Some(cfg.seed);
    m.config = snapshot(&cfg)?;
    let source = center_source(a.center_ckpt)?;
    let scenes = m.stage("load", || load_scenes(a.scenes, a.features, &cfg))?;
    let mut states: Vec<SceneState> = m.stage("prepare", || {
        prepare_states(&scenes, &cfg.segment, &source, cfg.ppo.bank_capacity)
    })?;
    let sem_dim = scenes[0].feat_dim;
    let init = init_policies(&cfg.policy, sem_dim, cfg.seed);

    let ckpt_dir = a.out.join("checkpoints");
    mkdir(&ckpt_dir)?;
    write(&a.out.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    init.save(&ckpt_dir.join("epoch_0000.bin"))?;
    let every = a.checkpoint_every;
    let mut saved = vec![ckpt_dir.join("epoch_0000.bin")];
    let out = m.stage("train", || {
        train(
            &mut states,
            init,
            &cfg.ppo,
            &cfg.geo,
            cfg.epochs,
            cfg.seed,
            |em, pol, _| {
                info!(
                    "epoch {} reward {:.2} positive {} loss {:.4}",
                    em.epoch, em.mean_reward, em.n_positive, em.loss_total
                );
                if every > 0 && em.epoch % every == 0 {
                    let p = ckpt_dir.join(format!("epoch_{:04}.bin", em.epoch));
                    pol.save(&p)?;
                    saved.push(p);
                }
                Ok(())
            },
        )
    })?;
    let policy = a.out.join("policy.bin");
    out.policies.save(&policy)?;
    let metrics = a.out.join("metrics.jsonl");
    write(&metrics, metrics_jsonl(&out.metrics)?.as_bytes())?;
    let pseudo = out.pseudo.save_dir(&a.out.join("pseudo"))?;
    let bank_dir = a.out.join("banks");
    mkdir(&bank_dir)?;
    for st in &states {
        let p = bank_dir.join(format!("{}.txt", st.scene.scene_id));
        st.bank.save(&p)?;
        m.output(p);
    }
    m.outputs.extend(saved);
    m.outputs.extend([policy, metrics, a.out.join("config.toml")]);
    m.outputs.extend(pseudo);
    info!("{} pseudo masks over {} scenes", out.pseudo.len(), states.len());
    finish(&m, a.out, true)
}

/// `policy.bin` inside a training output directory, or a checkpoint file.
fn policy_file(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("policy.bin")
    } else {
        p.to_path_buf()
    }
}

pub struct DiscoverArgs<'a> {
    pub scenes: &'a Path,
    pub policies: &'a Path,
    pub rollouts: usize,
    pub out: &'a Path,
    pub config: Option<&'a Path>,
    pub center_ckpt: Option<&'a Path>,
    pub features: Features,
    pub seed: Option<u64>,
}

pub fn discover(a: &DiscoverArgs<'_>, mut m: RunManifest) -> Result<()> {
    let cfg_path = a
        .config
        .map(Path::to_path_buf)
        .or_else(|| Some(a.policies.join("config.toml")).filter(|p| p.is_file()));
    let mut cfg = load_config(cfg_path.as_deref())?;
    cfg.discover_rollouts = a.rollouts;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    m.seed = Some(cfg.seed);
    m.config = snapshot(&cfg)?;
    let policies = PolicySet::<f32>::load(&policy_file(a.policies))?;
    let source = center_source(a.center_ckpt)?;
    let scenes = m.stage("load", || load_scenes(a.scenes, a.features, &cfg))?;
    if scenes[0].feat_dim != policies.sem_dim() {
        return Err(CliError::Core(Error::DimMismatch(format!(
            "scenes carry {} feature channels, policies expect {}",
            scenes[0].feat_dim,
            policies.sem_dim()
        ))));
    }
    let mut states = m.stage("prepare", || {
        prepare_states(&scenes, &cfg.segment, &source, cfg.ppo.bank_capacity)
    })?;
    let preds = m.stage("rollouts", || discover_all(&mut states, &policies, &cfg, cfg.seed))?;
    info!("{} masks over {} scenes", preds.len(), states.len());
    write_json(a.out, &preds)?;
    m.output(a.out);
    finish(&m, a.out, false)
}

/// Predictions from a prediction list, a pseudo-mask file (one scene or
/// several) or a pseudo-mask directory.
fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    if path.is_dir() {
        return Ok(PseudoMaskBank::load_dir(path)?.predictions());
    }
    let bytes = fs::read(path).map_err(|e| {
        CliError::Core(Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })?;
    if let Ok(p) = serde_json::from_slice::<Vec<Prediction>>(&bytes) {
        return Ok(p);
    }
    let list = match serde_json::from_slice::<Vec<SceneMasks>>(&bytes) {
        Ok(l) => l,
        Err(_) => vec![serde_json::from_slice::<SceneMasks>(&bytes).map_err(|_| {
            Error::Format(format!(
                "{}: neither a prediction list nor a pseudo-mask file",
                path.display()
            ))
        })?],
    };
    Ok(PseudoMaskBank::from_scene_masks(list).predictions())
}

#[derive(Serialize)]
struct CleanReport<'a> {
    raw: &'a EvalReport,
    cleaned: &'a EvalReport,
}

pub fn eval(pred: &Path, scenes: &Path, clean: bool, out: &Path, csv: Option<&Path>, mut m: RunManifest) -> Result<()> {
    let preds = load_predictions(pred)?;
    let list = load_scenes(scenes, Features::Files, &EngineConfig::default())?;
    let gt = ground_truth(&list);
    let raw = m.stage("evaluate", || evaluate_ap(&preds, &gt))?;
    info!("AP {:.4} AP@50 {:.4} AP@25 {:.4}", raw.ap, raw.ap50, raw.ap25);
    let report_csv = if clean {
        let cleaned = evaluate_ap(&clean_pseudo_labels(&preds, &gt), &gt)?;
        info!("cleaned AP {:.4} AP@50 {:.4}", cleaned.ap, cleaned.ap50);
        write_json(
            out,
            &CleanReport {
                raw: &raw,
                cleaned: &cleaned,
            },
        )?;
        format!("raw\n{}cleaned\n{}", raw.to_csv(), cleaned.to_csv())
    } else {
        write_json(out, &raw)?;
        raw.to_csv()
    };
    m.output(out);
    if let Some(c) = csv {
        write(c, report_csv.as_bytes())?;
        m.output(c);
    }
    finish(&m, out, false)
}

pub fn stats(banks: &Path, scenes: &Path, checkpoints: &[usize], out: Option<&Path>, mut m: RunManifest) -> Result<()> {
    let bank = PseudoMaskBank::load_dir(banks)?;
    let list = load_scenes(scenes, Features::Files, &EngineConfig::default())?;
    let gt = ground_truth(&list);
    let st = m.stage("stats", || discovery_stats(&bank.discovered(), &gt, checkpoints));
    let csv = st.to_csv();
    match out {
        Some(p) => {
            write(p, csv.as_bytes())?;
            m.output(p);
            finish(&m, p, false)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn export(scenes: &Path, pred: &Path, out: &Path, mut m: RunManifest) -> Result<()> {
    let preds = load_predictions(pred)?;
    let list = load_scenes(scenes, Features::Files, &EngineConfig::default())?;
    mkdir(out)?;
    for s in &list {
        let mut mine: Vec<&Prediction> = preds.iter().filter(|p| p.scene_id == s.scene_id).collect();
        mine.sort_by(|a, b| a.confidence.total_cmp(&b.confidence));
        let mut labels = vec![-1i32; s.len()];
        for (j, p) in mine.iter().enumerate() {
            for &i in &p.points {
                let slot = labels.get_mut(i as usize).ok_or_else(|| {
                    Error::Format(format!(
                        "prediction point {i} outside scene {} ({} points)",
                        s.scene_id,
                        s.len()
                    ))
                })?;
                *slot = j as i32;
            }
        }
        let path = out.join(format!("{}.ply", s.scene_id));
        export_ply(s, &labels, &path)?;
        m.output(path);
    }
    finish(&m, out, true)
}

pub fn benchmark(config: Option<&Path>, seeds: Option<Vec<u64>>, out: &Path, mut m: RunManifest) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Core(Error::Io(e)))?;
            toml::from_str::<BenchmarkConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => BenchmarkConfig::default(),
    };
    if let Some(s) = seeds {
        cfg.master_seeds = s;
    }
    if cfg.master_seeds.is_empty() {
        return Err(CliError::Usage("benchmark needs at least one seed".into()));
    }
    cfg.engine.validate()?;
    m.config = Some(toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?);
    mkdir(out)?;
    let report = m.stage("benchmark", || {
        run_benchmark(&cfg, |r| {
            info!(
                "seed {}: AP@50 {:.3} (untrained {:.3}), reward {:.2} -> {:.2}, {:.0} s",
                r.master, r.trained.ap50, r.baseline.ap50, r.reward_first, r.reward_last, r.seconds
            )
        })
    })?;
    for r in &report.seeds {
        let p = out.join(format!("seed_{}_stats.csv", r.master));
        write(&p, r.stats.to_csv().as_bytes())?;
        m.output(p);
    }
    let p = out.join("report.json");
    write_json(&p, &report)?;
    m.output(p);
    println!(
        "median AP@50 {:.4}, untrained {:.4}, {:.0} s",
        report.median_ap50, report.median_baseline_ap50, report.seconds
    );
    finish(&m, out, true)
}
