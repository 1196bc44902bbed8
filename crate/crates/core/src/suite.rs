//! Synthetic benchmark: train on generated scenes, discover on held-out
//! scenes, compare against the untrained policy.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::discovery::{rollout_discover, to_predictions};
use crate::error::Result;
use crate::evalap::{
    clean_pseudo_labels, discovery_stats, evaluate_ap, gt_masks_of, DiscoveryStats, EvalReport, GroundTruth, Prediction,
};
use crate::par;
use crate::policynet::{PolicyConfig, PolicySet};
use crate::ppo::{train, CenterSource, EpochMetrics, SceneState};
use crate::rng::{rng_from, stream, stream_seed};
use crate::scenegraph::{Scene, SegmentConfig};
use crate::synth::{attach_features, gen_scenes, Archetype, FeatureSpec, SynthScene};

const FEATURE_STREAM: u64 = 0xFEA7;
const DISCOVER_STREAM: u64 = 0xD15C;
const INIT_STREAM: u64 = 0x1417;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub engine: EngineConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub master_seeds: Vec<u64>,
    pub checkpoints: Vec<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            engine: EngineConfig::benchmark(),
            n_train: 20,
            n_test: 10,
            data_seed: 2024,
            master_seeds: vec![1, 2, 3],
            checkpoints: vec![50, 100, 150, 200],
        }
    }
}

/// Scenes `0..n_train` train, the next `n_test` are held out. Features come
/// from a separate stream per scene.
pub fn make_dataset(cfg: &BenchmarkConfig) -> Result<(Vec<Scene>, Vec<Scene>)> {
    let e = &cfg.engine;
    let all = gen_scenes(&e.scene, cfg.n_train + cfg.n_test, cfg.data_seed, 0)?;
    let scenes: Vec<Scene> = par::map(&all, |i, s: &SynthScene| {
        synthetic_features(s.scene.clone(), &s.classes, &e.features, cfg.data_seed, i)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut scenes = scenes;
    let test = scenes.split_off(cfg.n_train);
    Ok((scenes, test))
}

/// Semantic features for scene `index` of a set generated from `seed`.
pub fn synthetic_features(
    scene: Scene,
    classes: &[Archetype],
    spec: &FeatureSpec,
    seed: u64,
    index: usize,
) -> Result<Scene> {
    attach_features(
        scene,
        classes,
        spec,
        &mut stream(stream_seed(seed, FEATURE_STREAM), index as u64),
    )
}

/// Untrained policies for master seed `master`.
pub fn init_policies(cfg: &PolicyConfig, sem_dim: usize, master: u64) -> PolicySet<f32> {
    PolicySet::new(cfg, sem_dim, &mut rng_from(stream_seed(master, INIT_STREAM)))
}

pub fn prepare_states(
    scenes: &[Scene],
    seg: &SegmentConfig,
    source: &CenterSource,
    bank: usize,
) -> Result<Vec<SceneState>> {
    par::map(scenes, |_, s| SceneState::prepare(s.clone(), seg, source, bank))
        .into_iter()
        .collect()
}

pub fn ground_truth(scenes: &[Scene]) -> GroundTruth {
    scenes.iter().map(|s| (s.scene_id.clone(), gt_masks_of(s))).collect()
}

/// Direct-rollout predictions on fresh copies of `states` (empty cost banks).
pub fn discover_all(
    states: &mut [SceneState],
    policies: &PolicySet<f32>,
    cfg: &EngineConfig,
    master: u64,
) -> Result<Vec<Prediction>> {
    let m = stream_seed(master, DISCOVER_STREAM);
    let per = par::map_mut(states, |i, st| -> Result<Vec<Prediction>> {
        let found = rollout_discover(
            st,
            policies,
            cfg.discover_rollouts,
            &cfg.ppo,
            &cfg.geo,
            cfg.discover_merges,
            &mut stream(m, i as u64),
        )?;
        Ok(to_predictions(&st.scene.scene_id, &found))
    });
    let mut out = Vec::new();
    for p in per {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedResult {
    pub master: u64,
    pub trained: EvalReport,
    pub baseline: EvalReport,
    pub reward_first: f64,
    pub reward_last: f64,
    pub stats: DiscoveryStats,
    pub pseudo_raw: Option<EvalReport>,
    pub pseudo_clean: Option<EvalReport>,
    pub metrics: Vec<EpochMetrics>,
    pub seconds: f64,
    #[serde(skip)]
    pub policies: Option<PolicySet<f32>>,
}

/// Mean of `mean_reward` over the first and last tenth of the epochs.
pub fn reward_trend(metrics: &[EpochMetrics]) -> (f64, f64) {
    if metrics.is_empty() {
        return (0.0, 0.0);
    }
    let w = (metrics.len() / 10).max(1);
    let mean = |s: &[EpochMetrics]| s.iter().map(|m| m.mean_reward).sum::<f64>() / s.len() as f64;
    (mean(&metrics[..w]), mean(&metrics[metrics.len() - w..]))
}

pub fn run_seed(
    cfg: &BenchmarkConfig,
    train_scenes: &[Scene],
    test_scenes: &[Scene],
    master: u64,
) -> Result<SeedResult> {
    let t0 = Instant::now();
    let e = &cfg.engine;
    let source = CenterSource::Oracle;
    let sem_dim = train_scenes.first().map_or(0, |s| s.feat_dim);
    let init = init_policies(&e.policy, sem_dim, master);

    let test_gt = ground_truth(test_scenes);
    let mut base_states = prepare_states(test_scenes, &e.segment, &source, e.ppo.bank_capacity)?;
    let base_preds = discover_all(&mut base_states, &init, e, master)?;
    let baseline = evaluate_ap(&base_preds, &test_gt)?;

    let mut states = prepare_states(train_scenes, &e.segment, &source, e.ppo.bank_capacity)?;
    let out = train(&mut states, init, &e.ppo, &e.geo, e.epochs, master, |_, _, _| Ok(()))?;

    let mut test_states = prepare_states(test_scenes, &e.segment, &source, e.ppo.bank_capacity)?;
    let preds = discover_all(&mut test_states, &out.policies, e, master)?;
    let trained = evaluate_ap(&preds, &test_gt)?;

    let train_gt = ground_truth(train_scenes);
    let raw = out.pseudo.predictions();
    let (pseudo_raw, pseudo_clean) = if raw.is_empty() {
        (None, None)
    } else {
        let cleaned = clean_pseudo_labels(&raw, &train_gt);
        (
            Some(evaluate_ap(&raw, &train_gt)?),
            Some(evaluate_ap(&cleaned, &train_gt)?),
        )
    };
    let stats = discovery_stats(&out.pseudo.discovered(), &train_gt, &cfg.checkpoints);
    let (reward_first, reward_last) = reward_trend(&out.metrics);
    Ok(SeedResult {
        master,
        trained,
        baseline,
        reward_first,
        reward_last,
        stats,
        pseudo_raw,
        pseudo_clean,
        metrics: out.metrics,
        seconds: t0.elapsed().as_secs_f64(),
        policies: Some(out.policies),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seeds: Vec<SeedResult>,
    pub median_ap50: f64,
    pub median_baseline_ap50: f64,
    pub seconds: f64,
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

impl BenchmarkReport {
    /// Index of the seed whose trained AP@50 is the median (lower middle for
    /// even counts).
    pub fn median_seed(&self) -> usize {
        let mut idx: Vec<usize> = (0..self.seeds.len()).collect();
        idx.sort_by(|&a, &b| self.seeds[a].trained.ap50.total_cmp(&self.seeds[b].trained.ap50));
        idx[(idx.len() - 1) / 2]
    }
}

pub fn run_benchmark(cfg: &BenchmarkConfig, mut progress: impl FnMut(&SeedResult)) -> Result<BenchmarkReport> {
    cfg.engine.validate()?;
    let t0 = Instant::now();
    let (train_scenes, test_scenes) = make_dataset(cfg)?;
    let mut seeds = Vec::new();
    for &m in &cfg.master_seeds {
        let r = run_seed(cfg, &train_scenes, &test_scenes, m)?;
        progress(&r);
        seeds.push(r);
    }
    let ap: Vec<f64> = seeds.iter().map(|s| s.trained.ap50).collect();
    let base: Vec<f64> = seeds.iter().map(|s| s.baseline.ap50).collect();
    Ok(BenchmarkReport {
        median_ap50: median(&ap),
        median_baseline_ap50: median(&base),
        seeds,
        seconds: t0.elapsed().as_secs_f64(),
    })
}
