use serde::{Deserialize, Serialize};

use super::loss::{build_targets, ppo_update, LossStats, SceneSteps};
use super::rollout::{collect_trajectory, superpoint_features, RolloutMode, Trajectory};
use super::state::SceneState;
use super::PpoConfig;
use crate::discovery::{PseudoMask, PseudoMaskBank};
use crate::error::Result;
use crate::geomreward::{GeoConfig, REWARD_OBJECT};
use crate::nn::Adam;
use crate::par;
use crate::policynet::PolicySet;
use crate::rng::{rng_from, stream_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean over trajectories of the summed step rewards.
    pub mean_reward: f64,
    pub mean_final_reward: f64,
    pub n_positive: usize,
    pub mean_length: f64,
    pub bank_min: usize,
    pub bank_mean: f64,
    pub loss_total: f64,
    pub loss_policy: f64,
    pub loss_value: f64,
    pub entropy: f64,
    pub n_pseudo: usize,
}

pub struct TrainOutput {
    pub policies: PolicySet<f32>,
    pub metrics: Vec<EpochMetrics>,
    pub pseudo: PseudoMaskBank,
}

/// Seed of the stream used by scene `scene` in `epoch` (epoch 0 is warm-up).
pub fn episode_seed(master: u64, epoch: usize, scene: usize) -> u64 {
    stream_seed(stream_seed(master, epoch as u64), scene as u64)
}

/// Fills every scene's cost bank with rollouts of the current policy; no
/// learning and no pseudo masks.
pub fn warm_up_banks(
    states: &mut [SceneState],
    policies: &PolicySet<f32>,
    cfg: &PpoConfig,
    geo: &GeoConfig,
    master: u64,
) -> Result<()> {
    let res = par::map_mut(states, |i, st| -> Result<()> {
        let mut rng = rng_from(episode_seed(master, 0, i));
        let (feats, _) = superpoint_features(&policies.encoder, &st.enc_input, &st.partition)?;
        for _ in 0..cfg.bank_warmup_rollouts {
            collect_trajectory(st, policies, &feats, cfg, geo, RolloutMode::Sample, &mut rng)?;
        }
        Ok(())
    });
    res.into_iter().collect()
}

/// PPO training: each epoch collects one trajectory per scene, in batches of
/// `batch_scenes` scenes, with one update per batch. `on_epoch` sees the
/// metrics and parameters after every epoch.
pub fn train(
    states: &mut [SceneState],
    mut policies: PolicySet<f32>,
    cfg: &PpoConfig,
    geo: &GeoConfig,
    epochs: usize,
    master: u64,
    mut on_epoch: impl FnMut(&EpochMetrics, &PolicySet<f32>, &[SceneState]) -> Result<()>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut metrics = Vec::with_capacity(epochs);
    let mut pseudo = PseudoMaskBank::new();
    if epochs == 0 {
        return Ok(TrainOutput {
            policies,
            metrics,
            pseudo,
        });
    }
    warm_up_banks(states, &policies, cfg, geo, master)?;
    let mut opt = Adam::new(cfg.lr);
    for epoch in 1..=epochs {
        let mut trajs: Vec<Trajectory> = Vec::with_capacity(states.len());
        let mut loss = LossStats::default();
        let mut n_updates = 0usize;
        for start in (0..states.len()).step_by(cfg.batch_scenes) {
            let end = (start + cfg.batch_scenes).min(states.len());
            let batch = &mut states[start..end];
            let snapshot = &policies;
            let collected = par::map_mut(batch, |j, st| -> Result<Trajectory> {
                let mut rng = rng_from(episode_seed(master, epoch, start + j));
                let (feats, _) = superpoint_features(&snapshot.encoder, &st.enc_input, &st.partition)?;
                collect_trajectory(st, snapshot, &feats, cfg, geo, RolloutMode::Sample, &mut rng)
            });
            let collected: Vec<Trajectory> = collected.into_iter().collect::<Result<_>>()?;
            let per_scene: Vec<Vec<Trajectory>> = collected.iter().map(|t| vec![t.clone()]).collect();
            let targets = build_targets(&per_scene, cfg);
            let scenes: Vec<SceneSteps<'_, f32>> = batch
                .iter()
                .zip(targets)
                .map(|(st, steps)| SceneSteps {
                    input: &st.enc_input,
                    partition: &st.partition,
                    sizes: &st.sizes,
                    steps,
                })
                .collect();
            let st = ppo_update(&mut policies, &mut opt, &scenes, cfg)?;
            loss.total += st.total;
            loss.policy += st.policy;
            loss.value += st.value;
            loss.entropy += st.entropy;
            n_updates += 1;
            for (t, s) in collected.iter().zip(batch.iter()) {
                if t.reward() == REWARD_OBJECT {
                    pseudo.insert(
                        &s.scene.scene_id,
                        PseudoMask {
                            point_indices: s.region_points(&t.region),
                            score: t.final_score.confidence(),
                            source: t.final_score.source(),
                            epoch,
                        },
                    );
                }
            }
            trajs.extend(collected);
        }
        let n = trajs.len().max(1) as f64;
        let u = n_updates.max(1) as f64;
        let banks: Vec<usize> = states.iter().map(|s| s.bank.len()).collect();
        let m = EpochMetrics {
            epoch,
            mean_reward: trajs.iter().map(Trajectory::episode_reward).sum::<f64>() / n,
            mean_final_reward: trajs.iter().map(|t| t.reward() as f64).sum::<f64>() / n,
            n_positive: trajs.iter().filter(|t| t.reward() == REWARD_OBJECT).count(),
            mean_length: trajs.iter().map(|t| t.steps.len() as f64).sum::<f64>() / n,
            bank_min: banks.iter().copied().min().unwrap_or(0),
            bank_mean: banks.iter().sum::<usize>() as f64 / banks.len().max(1) as f64,
            loss_total: loss.total / u,
            loss_policy: loss.policy / u,
            loss_value: loss.value / u,
            entropy: loss.entropy / u,
            n_pseudo: pseudo.len(),
        };
        log::info!(
            "epoch {epoch}: reward {:.3}, positive {}, pseudo {}",
            m.mean_reward,
            m.n_positive,
            m.n_pseudo
        );
        on_epoch(&m, &policies, states)?;
        metrics.push(m);
    }
    Ok(TrainOutput {
        policies,
        metrics,
        pseudo,
    })
}

/// Metrics as JSON lines.
pub fn metrics_jsonl(metrics: &[EpochMetrics]) -> Result<String> {
    let mut s = String::new();
    for m in metrics {
        s.push_str(&serde_json::to_string(m)?);
        s.push('\n');
    }
    Ok(s)
}
