//! Inference rollouts, the pseudo-mask bank and mask scoring.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evalap::{iou, DiscoveredMask, Prediction};
use crate::geomreward::{GeoConfig, REWARD_OBJECT};
use crate::policynet::PolicySet;
use crate::ppo::{collect_trajectory, superpoint_features, PpoConfig, RewardSource, RolloutMode, SceneState, Score};
use crate::scenegraph::io::write_atomic;

pub const DEDUPE_IOU: f64 = 0.8;
const MIN_CONFIDENCE: f64 = 1e-6;

/// `max(dominant_fraction, 1 − cost)` clamped to `(0, 1]`.
pub fn confidence(dominant_fraction: f64, cost: f64) -> f64 {
    let c = dominant_fraction.max(1.0 - cost);
    if c.is_nan() {
        return MIN_CONFIDENCE;
    }
    c.clamp(MIN_CONFIDENCE, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoMask {
    pub point_indices: Vec<u32>,
    pub score: f64,
    pub source: RewardSource,
    pub epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMasks {
    pub scene_id: String,
    pub masks: Vec<PseudoMask>,
}

/// Positive-reward masks per scene. Insertion drops a mask whose IoU with a
/// stored one exceeds the dedupe threshold, so stored masks stay distinct.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PseudoMaskBank {
    pub scenes: BTreeMap<String, Vec<PseudoMask>>,
    pub threshold: f64,
}

impl PseudoMaskBank {
    pub fn new() -> Self {
        PseudoMaskBank {
            scenes: BTreeMap::new(),
            threshold: DEDUPE_IOU,
        }
    }

    /// Returns whether the mask was stored.
    pub fn insert(&mut self, scene_id: &str, mask: PseudoMask) -> bool {
        if mask.point_indices.is_empty() {
            return false;
        }
        let list = self.scenes.entry(scene_id.to_string()).or_default();
        if list
            .iter()
            .any(|m| iou(&m.point_indices, &mask.point_indices) > self.threshold)
        {
            return false;
        }
        list.push(mask);
        true
    }

    pub fn len(&self) -> usize {
        self.scenes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scene_len(&self, scene_id: &str) -> usize {
        self.scenes.get(scene_id).map_or(0, Vec::len)
    }

    pub fn to_scene_masks(&self) -> Vec<SceneMasks> {
        self.scenes
            .iter()
            .map(|(id, m)| SceneMasks {
                scene_id: id.clone(),
                masks: m.clone(),
            })
            .collect()
    }

    pub fn from_scene_masks(list: Vec<SceneMasks>) -> Self {
        let mut b = PseudoMaskBank::new();
        for s in list {
            b.scenes.entry(s.scene_id).or_default().extend(s.masks);
        }
        b
    }

    pub fn discovered(&self) -> Vec<DiscoveredMask> {
        self.scenes
            .iter()
            .flat_map(|(id, ms)| {
                ms.iter().map(move |m| DiscoveredMask {
                    scene_id: id.clone(),
                    points: m.point_indices.clone(),
                    epoch: m.epoch,
                })
            })
            .collect()
    }

    pub fn predictions(&self) -> Vec<Prediction> {
        self.scenes
            .iter()
            .flat_map(|(id, ms)| {
                ms.iter().map(move |m| Prediction {
                    scene_id: id.clone(),
                    points: m.point_indices.clone(),
                    confidence: m.score,
                })
            })
            .collect()
    }

    /// One `<scene_id>.json` per scene.
    pub fn save_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for s in self.to_scene_masks() {
            let p = dir.join(format!("{}.json", s.scene_id));
            write_atomic(&p, serde_json::to_string(&s)?.as_bytes())?;
            out.push(p);
        }
        Ok(out)
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        let mut list = Vec::new();
        for f in files {
            list.push(serde_json::from_slice::<SceneMasks>(&std::fs::read(&f)?)?);
        }
        Ok(Self::from_scene_masks(list))
    }

    /// All scenes in a single JSON array.
    pub fn save_file(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(&self.to_scene_masks())?.as_bytes())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let list: Vec<SceneMasks> = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok(Self::from_scene_masks(list))
    }
}

/// Greedy by descending score (ties keep input order); a mask survives when
/// its IoU with every survivor is at most `threshold`. Returns kept indices.
pub fn dedupe_masks(masks: &[(Vec<u32>, f64)], threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by(|&a, &b| masks[b].1.total_cmp(&masks[a].1).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&j| iou(&masks[i].0, &masks[j].0) <= threshold) {
            kept.push(i);
        }
    }
    kept
}

/// Confidence of each superpoint region without touching the cost bank.
pub fn score_masks(regions: &[Vec<u32>], state: &SceneState, geo: &GeoConfig) -> Result<Vec<f64>> {
    regions
        .iter()
        .map(|r| {
            let (v, cost) = state.evaluate(r, geo)?;
            Ok(confidence(v.dominant_fraction, cost))
        })
        .collect()
}

/// A positive-reward candidate found by an inference rollout.
#[derive(Clone, Debug)]
pub struct Discovered {
    pub region: Vec<u32>,
    pub points: Vec<u32>,
    pub score: Score,
    pub confidence: f64,
}

/// Episodes with sampled seeds; merges follow `mode`. The scene's cost bank
/// is first filled by `cfg.bank_warmup_rollouts` episodes when it is empty.
#[allow(clippy::too_many_arguments)]
pub fn rollout_discover(
    state: &mut SceneState,
    policies: &PolicySet<f32>,
    n_rollouts: usize,
    cfg: &PpoConfig,
    geo: &GeoConfig,
    mode: RolloutMode,
    rng: &mut impl Rng,
) -> Result<Vec<Discovered>> {
    if n_rollouts == 0 {
        return Ok(Vec::new());
    }
    let (feats, _) = superpoint_features(&policies.encoder, &state.enc_input, &state.partition)?;
    if state.bank.is_empty() {
        for _ in 0..cfg.bank_warmup_rollouts {
            collect_trajectory(state, policies, &feats, cfg, geo, RolloutMode::Greedy, rng)?;
        }
    }
    let mut out = Vec::new();
    for _ in 0..n_rollouts {
        let t = collect_trajectory(state, policies, &feats, cfg, geo, mode, rng)?;
        if t.reward() == REWARD_OBJECT {
            out.push(Discovered {
                points: state.region_points(&t.region),
                confidence: t.final_score.confidence(),
                region: t.region,
                score: t.final_score,
            });
        }
    }
    Ok(out)
}

/// Deduplicated point-level predictions from [`rollout_discover`] output.
pub fn to_predictions(scene_id: &str, found: &[Discovered]) -> Vec<Prediction> {
    let masks: Vec<(Vec<u32>, f64)> = found.iter().map(|d| (d.points.clone(), d.confidence)).collect();
    dedupe_masks(&masks, DEDUPE_IOU)
        .into_iter()
        .map(|i| Prediction {
            scene_id: scene_id.to_string(),
            points: masks[i].0.clone(),
            confidence: masks[i].1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_clamps() {
        assert_eq!(confidence(1.0, 5.0), 1.0);
        assert_eq!(confidence(0.1, 0.0), 1.0);
        assert_eq!(confidence(0.0, f64::INFINITY), MIN_CONFIDENCE);
        assert!((confidence(0.3, 0.6) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn dedupe_fixtures() {
        let a: Vec<u32> = (0..10).collect();
        assert_eq!(dedupe_masks(&[(a.clone(), 0.5), (a.clone(), 0.9)], 0.8), vec![1]);
        let b: Vec<u32> = (20..30).collect();
        assert_eq!(dedupe_masks(&[(a.clone(), 0.5), (b, 0.9)], 0.8).len(), 2);
        let c: Vec<u32> = (0..9).collect();
        let d: Vec<u32> = vec![0, 1, 2, 100, 101];
        assert!((iou(&a, &c) - 0.9).abs() < 1e-12);
        assert!((iou(&a, &d) - 0.25).abs() < 1e-12);
        let kept = dedupe_masks(&[(a, 0.9), (c, 0.8), (d, 0.7)], 0.8);
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn bank_rejects_near_duplicates() {
        let mut b = PseudoMaskBank::new();
        let m = |p: Vec<u32>| PseudoMask {
            point_indices: p,
            score: 1.0,
            source: RewardSource::Geo,
            epoch: 1,
        };
        assert!(b.insert("s", m((0..10).collect())));
        assert!(!b.insert("s", m((0..9).collect())));
        assert!(b.insert("s", m((5..15).collect())));
        assert!(b.insert("t", m((0..10).collect())));
        assert_eq!(b.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        b.save_dir(dir.path()).unwrap();
        assert_eq!(PseudoMaskBank::load_dir(dir.path()).unwrap(), b);
    }
}
