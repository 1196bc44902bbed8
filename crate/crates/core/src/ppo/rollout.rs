use rand::Rng;

use super::state::{SceneState, Score};
use super::PpoConfig;
use crate::error::Result;
use crate::geomreward::{GeoConfig, REWARD_OBJECT};
use crate::policynet::{merge_action, sample_merge, sample_seed, ActionSample, PolicySet};
use crate::scenegraph::{aggregate_features, EncoderCache, PointEncoder, SuperpointPartition};
use crate::spatial::{dist2, P3};
use serde::{Deserialize, Serialize};

use crate::tensor::{Mat, Real};

/// Seeds are sampled in both modes; merges are sampled while training and
/// thresholded at one half for inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutMode {
    Sample,
    Greedy,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepAction {
    Seed {
        candidates: Vec<u32>,
        choice: usize,
    },
    Merge {
        region: Vec<u32>,
        frontier: Vec<u32>,
        chosen: Vec<bool>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub action: StepAction,
    pub sample: ActionSample,
    /// `None` for a seed step followed by merge rounds.
    pub reward: Option<i32>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// Superpoints of the final candidate, sorted.
    pub region: Vec<u32>,
    pub final_score: Score,
    pub terminal: bool,
}

impl Trajectory {
    pub fn reward(&self) -> i32 {
        self.final_score.fused
    }

    /// Step rewards for return computation; the unrewarded seed step counts 0.
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward.unwrap_or(0) as f64).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.sample.value).collect()
    }

    /// Sum of all recorded rewards.
    pub fn episode_reward(&self) -> f64 {
        self.steps.iter().filter_map(|s| s.reward).map(f64::from).sum()
    }
}

/// Superpoints whose centroid lies within `radius` of a random scene point.
/// Redraws the centre up to `retries` times, then falls back to all
/// superpoints.
pub fn seed_crop(
    points: &[P3],
    partition: &SuperpointPartition,
    radius: f64,
    retries: usize,
    rng: &mut impl Rng,
) -> Vec<u32> {
    let r2 = radius * radius;
    for _ in 0..retries.max(1) {
        let c = points[rng.random_range(0..points.len())];
        let e: Vec<u32> = partition
            .centroids
            .iter()
            .enumerate()
            .filter(|(_, p)| dist2(p, &c) <= r2)
            .map(|(k, _)| k as u32)
            .collect();
        if !e.is_empty() {
            return e;
        }
    }
    (0..partition.k() as u32).collect()
}

/// Encoder features averaged per superpoint.
pub fn superpoint_features<T: Real>(
    encoder: &PointEncoder<T>,
    input: &Mat<T>,
    partition: &SuperpointPartition,
) -> Result<(Mat<T>, EncoderCache<T>)> {
    let (per_point, cache) = encoder.forward(input)?;
    Ok((aggregate_features(&partition.members, &per_point), cache))
}

/// Point-count weighted mean of the region's superpoint features.
pub fn region_feature<T: Real>(feats: &Mat<T>, region: &[u32], sizes: &[f64]) -> Vec<T> {
    let total: f64 = region.iter().map(|&k| sizes[k as usize]).sum();
    let mut out = vec![T::zero(); feats.cols];
    for &k in region {
        let w = T::c(sizes[k as usize] / total);
        for (o, v) in out.iter_mut().zip(feats.row(k as usize)) {
            *o += w * *v;
        }
    }
    out
}

fn union_sorted(region: &[u32], add: impl Iterator<Item = u32>) -> Vec<u32> {
    let mut r = region.to_vec();
    r.extend(add);
    r.sort_unstable();
    r.dedup();
    r
}

/// One discovery episode: a seed inside a random crop, then up to `t_max`
/// merge rounds, each scored and fused. Stops at the first positive reward or
/// when a round merges nothing.
pub fn collect_trajectory(
    state: &mut SceneState,
    policies: &PolicySet<f32>,
    feats: &Mat<f32>,
    cfg: &PpoConfig,
    geo: &GeoConfig,
    mode: RolloutMode,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let candidates = seed_crop(&state.points, &state.partition, cfg.crop_radius, cfg.crop_retries, rng);
    let (dist, value, _) = policies.seed.forward(&feats.select_rows(&to_usize(&candidates)))?;
    let seed_sample = sample_seed(&dist, value, rng);
    let choice = seed_sample.indices[0];
    let mut region = vec![candidates[choice]];
    let mut steps = vec![Step {
        action: StepAction::Seed { candidates, choice },
        sample: seed_sample,
        reward: None,
    }];

    let mut flags = vec![false; state.k()];
    flags[region[0] as usize] = true;
    if state.partition.adjacency.frontier(&flags).is_empty() {
        let score = state.score(&region, geo)?;
        steps[0].reward = Some(score.fused);
        return Ok(Trajectory {
            steps,
            region,
            terminal: true,
            final_score: score,
        });
    }

    let mut last = None;
    for _ in 0..cfg.t_max {
        let frontier = state.partition.adjacency.frontier(&flags);
        if frontier.is_empty() {
            break;
        }
        let rf = region_feature(feats, &region, &state.sizes);
        let nb = feats.select_rows(&to_usize(&frontier));
        let (md, mv, _) = policies.merge.forward(&rf, &nb)?;
        let sample = match mode {
            RolloutMode::Sample => sample_merge(&md, mv, rng),
            RolloutMode::Greedy => merge_action(&md, &md.greedy(), mv),
        };
        let mut chosen = vec![false; frontier.len()];
        for &i in &sample.indices {
            chosen[i] = true;
        }
        let before = region.clone();
        region = union_sorted(&region, sample.indices.iter().map(|&i| frontier[i]));
        for &k in &region {
            flags[k as usize] = true;
        }
        let score = state.score(&region, geo)?;
        let stop = score.fused == REWARD_OBJECT || sample.indices.is_empty();
        steps.push(Step {
            action: StepAction::Merge {
                region: before,
                frontier,
                chosen,
            },
            sample,
            reward: Some(score.fused),
        });
        last = Some(score);
        if stop {
            break;
        }
    }
    let final_score = last.expect("at least one merge round");
    Ok(Trajectory {
        steps,
        region,
        terminal: true,
        final_score,
    })
}

pub(crate) fn to_usize(v: &[u32]) -> Vec<usize> {
    v.iter().map(|&i| i as usize).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::scenegraph::Scene;

    fn grid_scene() -> Scene {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f32 * 0.3, j as f32 * 0.3, 0.0]);
            }
        }
        let n = pts.len();
        Scene::new("g", pts, vec![[0; 3]; n], vec![-1; n]).unwrap()
    }

    #[test]
    fn crop_matches_distance_oracle() {
        let s = grid_scene();
        let assign: Vec<u32> = (0..100).map(|i| (i / 10) as u32).collect();
        let p = SuperpointPartition::from_assignment(&s, assign, 0.35).unwrap();
        let pts = s.points_f64();
        let all = seed_crop(&pts, &p, 100.0, 3, &mut rng_from(0));
        assert_eq!(all.len(), 10);
        let tiny = seed_crop(&pts, &p, 1e-9, 3, &mut rng_from(0));
        assert!(!tiny.is_empty());
        let mut rng = rng_from(5);
        let mut check = rng_from(5);
        let got = seed_crop(&pts, &p, 1.5, 3, &mut rng);
        let c = pts[check.random_range(0..pts.len())];
        let want: Vec<u32> = (0..10u32)
            .filter(|&k| dist2(&p.centroids[k as usize], &c) <= 2.25)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn region_feature_weights_by_size() {
        let f = Mat::from_vec(2, 1, vec![1.0f64, 4.0]);
        assert_eq!(region_feature(&f, &[0, 1], &[3.0, 1.0]), vec![1.75]);
    }
}
