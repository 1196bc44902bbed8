//! Class-agnostic instance AP, pseudo-label cleaning and discovery statistics.

mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use stats::{discovery_stats, CheckpointStats, DiscoveredMask, DiscoveryStats};

use crate::error::{Error, Result};

fn sorted(v: &[u32]) -> std::borrow::Cow<'_, [u32]> {
    if v.windows(2).all(|w| w[0] < w[1]) {
        std::borrow::Cow::Borrowed(v)
    } else {
        let mut s = v.to_vec();
        s.sort_unstable();
        s.dedup();
        std::borrow::Cow::Owned(s)
    }
}

/// Intersection over union of two point-index sets.
pub fn iou(a: &[u32], b: &[u32]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// A scored point mask in one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scene_id: String,
    pub points: Vec<u32>,
    pub confidence: f64,
}

/// Ground-truth masks per scene id.
pub type GroundTruth = BTreeMap<String, Vec<Vec<u32>>>;

/// IoU thresholds `0.25, 0.50, 0.55, ..., 0.95`.
pub fn thresholds() -> Vec<f64> {
    let mut t = vec![0.25];
    t.extend((0..10).map(|k| (50 + 5 * k) as f64 / 100.0));
    t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene_id: String,
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    pub n_gt: usize,
    pub n_pred: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap25: f64,
    /// `(threshold, AP)` for every evaluated threshold.
    pub per_threshold: Vec<(f64, f64)>,
    pub per_scene: Vec<SceneReport>,
    pub n_gt: usize,
    pub n_pred: usize,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        format!("ap,ap50,ap25\n{},{},{}\n", self.ap, self.ap50, self.ap25)
    }
}

/// Area under the precision envelope, with recall steps at each true positive.
fn average_precision(tp: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 || tp.is_empty() {
        return 0.0;
    }
    let mut prec = Vec::with_capacity(tp.len());
    let mut rec = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (i, &t) in tp.iter().enumerate() {
        if t {
            hits += 1;
        }
        prec.push(hits as f64 / (i + 1) as f64);
        rec.push(hits as f64 / n_gt as f64);
    }
    for i in (0..prec.len().saturating_sub(1)).rev() {
        prec[i] = prec[i].max(prec[i + 1]);
    }
    let mut ap = 0.0;
    let mut last_r = 0.0;
    for i in 0..tp.len() {
        if rec[i] > last_r {
            ap += (rec[i] - last_r) * prec[i];
            last_r = rec[i];
        }
    }
    ap
}

/// Predictions in evaluation order: descending confidence, then scene id,
/// then input order.
fn ranked(preds: &[Prediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence
            .total_cmp(&preds[a].confidence)
            .then_with(|| preds[a].scene_id.cmp(&preds[b].scene_id))
            .then(a.cmp(&b))
    });
    order
}

/// IoU of every prediction against every GT mask of its scene.
fn iou_table(preds: &[Prediction], gt: &GroundTruth) -> Vec<Vec<f64>> {
    crate::par::map(preds, |_, p| match gt.get(&p.scene_id) {
        Some(masks) => masks.iter().map(|g| iou(&p.points, g)).collect(),
        None => Vec::new(),
    })
}

fn ap_at(preds: &[Prediction], order: &[usize], ious: &[Vec<f64>], gt: &GroundTruth, tau: f64) -> f64 {
    let n_gt: usize = gt.values().map(Vec::len).sum();
    let mut used: BTreeMap<&str, Vec<bool>> = gt.iter().map(|(k, v)| (k.as_str(), vec![false; v.len()])).collect();
    let mut tp = Vec::with_capacity(order.len());
    for &pi in order {
        let mut hit = false;
        if let Some(flags) = used.get_mut(preds[pi].scene_id.as_str()) {
            let mut best: Option<(usize, f64)> = None;
            for (g, &v) in ious[pi].iter().enumerate() {
                if !flags[g] && v >= tau && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                flags[g] = true;
                hit = true;
            }
        }
        tp.push(hit);
    }
    average_precision(&tp, n_gt)
}

fn report_for(preds: &[Prediction], gt: &GroundTruth) -> (f64, f64, f64, Vec<(f64, f64)>) {
    let order = ranked(preds);
    let ious = iou_table(preds, gt);
    let per: Vec<(f64, f64)> = thresholds()
        .into_iter()
        .map(|t| (t, ap_at(preds, &order, &ious, gt, t)))
        .collect();
    let ap = per[1..].iter().map(|(_, a)| a).sum::<f64>() / 10.0;
    (ap, per[1].1, per[0].1, per)
}

/// AP averaged over IoU 0.50..0.95, plus AP@50 and AP@25.
pub fn evaluate_ap(preds: &[Prediction], gt: &GroundTruth) -> Result<EvalReport> {
    let n_gt: usize = gt.values().map(Vec::len).sum();
    if n_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let (ap, ap50, ap25, per_threshold) = report_for(preds, gt);
    let per_scene = gt
        .iter()
        .map(|(id, masks)| {
            let mine: Vec<Prediction> = preds.iter().filter(|p| &p.scene_id == id).cloned().collect();
            let one: GroundTruth = [(id.clone(), masks.clone())].into_iter().collect();
            let (ap, ap50, ap25, _) = report_for(&mine, &one);
            SceneReport {
                scene_id: id.clone(),
                ap,
                ap50,
                ap25,
                n_gt: masks.len(),
                n_pred: mine.len(),
            }
        })
        .collect();
    Ok(EvalReport {
        ap,
        ap50,
        ap25,
        per_threshold,
        per_scene,
        n_gt,
        n_pred: preds.len(),
    })
}

/// Replaces each prediction by its best-matching GT mask when IoU > 0.5 and
/// drops it otherwise. Several predictions of one GT object collapse to the
/// first in ranking order.
pub fn clean_pseudo_labels(preds: &[Prediction], gt: &GroundTruth) -> Vec<Prediction> {
    let ious = iou_table(preds, gt);
    let mut taken: BTreeMap<(&str, usize), ()> = BTreeMap::new();
    let mut out = Vec::new();
    for pi in ranked(preds) {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (g, &v) in ious[pi].iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            if v > 0.5 && taken.insert((p.scene_id.as_str(), g), ()).is_none() {
                out.push(Prediction {
                    scene_id: p.scene_id.clone(),
                    points: gt[&p.scene_id][g].clone(),
                    confidence: p.confidence,
                });
            }
        }
    }
    out
}

/// GT masks of a scene in instance-id order.
pub fn gt_masks_of(scene: &crate::scenegraph::Scene) -> Vec<Vec<u32>> {
    scene.gt_masks().into_values().collect()
}
