use serde::{Deserialize, Serialize};

use super::dbscan::{cluster_sizes, dbscan};
use crate::error::{Error, Result};
use crate::spatial::P3;

pub const REWARD_OBJECT: i32 = 10;
pub const REWARD_REJECT: i32 = -1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoConfig {
    /// Clustering radius in normalized units.
    pub r: f64,
    pub alpha: f64,
    pub min_pts: usize,
    /// Raises `min_pts` to this fraction of the candidate size.
    pub min_pts_fraction: f64,
}

impl Default for GeoConfig {
    fn default() -> Self {
        GeoConfig {
            r: 0.05,
            alpha: 0.3,
            min_pts: 5,
            min_pts_fraction: 0.15,
        }
    }
}

impl GeoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !(0.0..=1.0).contains(&self.alpha) || self.min_pts == 0 {
            return Err(Error::Config("geo: need r > 0, alpha in [0,1], min_pts >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_pts_fraction) {
            return Err(Error::Config("geo: min_pts_fraction must lie in [0,1]".into()));
        }
        Ok(())
    }

    /// Density threshold used for a candidate of `n` points, never above `n`.
    pub fn effective_min_pts(&self, n: usize) -> usize {
        let frac = (self.min_pts_fraction * n as f64).ceil() as usize;
        self.min_pts.max(frac).min(n).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoVerdict {
    pub reward: i32,
    pub dominant_fraction: f64,
    pub n_clusters: usize,
}

/// Centres `points` on their centroid and scales uniformly so the largest
/// bounding-box side is 1. Returns the normalized points and the scale.
pub fn normalize_candidate(points: &[P3]) -> Result<(Vec<P3>, f64)> {
    if points.is_empty() {
        return Err(Error::EmptyCandidate);
    }
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for d in 0..3 {
            c[d] += p[d];
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    c.iter_mut().for_each(|v| *v /= n);
    let ext = (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max);
    let scale = if ext > 1e-12 { 1.0 / ext } else { 1.0 };
    let out = points
        .iter()
        .map(|p| [(p[0] - c[0]) * scale, (p[1] - c[1]) * scale, (p[2] - c[2]) * scale])
        .collect();
    Ok((out, scale))
}

/// Shifts each normalized point by its offset, clusters the result and
/// rewards candidates whose largest cluster covers at least `alpha`.
pub fn verify_center_consistency(points: &[P3], offsets: &[P3], cfg: &GeoConfig) -> Result<GeoVerdict> {
    if points.is_empty() {
        return Err(Error::EmptyCandidate);
    }
    if offsets.len() != points.len() {
        return Err(Error::dims(format!(
            "{} offsets for {} candidate points",
            offsets.len(),
            points.len()
        )));
    }
    let (norm, scale) = normalize_candidate(points)?;
    let shifted: Vec<P3> = norm
        .iter()
        .zip(offsets)
        .map(|(p, o)| [p[0] + o[0] * scale, p[1] + o[1] * scale, p[2] + o[2] * scale])
        .collect();
    let labels = dbscan(&shifted, cfg.r, cfg.effective_min_pts(points.len()));
    let sizes = cluster_sizes(&labels);
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let dominant_fraction = largest as f64 / points.len() as f64;
    Ok(GeoVerdict {
        reward: if dominant_fraction >= cfg.alpha {
            REWARD_OBJECT
        } else {
            REWARD_REJECT
        },
        dominant_fraction,
        n_clusters: sizes.len(),
    })
}

/// Candidate of `n_object` points on a small object with oracle offsets plus
/// `n_background` zero-offset points spread over a 1 m wall.
pub fn mixed_candidate_fixture(n_object: usize, n_background: usize) -> (Vec<P3>, Vec<P3>) {
    let centre = [0.5, 0.3, 0.5];
    let mut pts = Vec::new();
    let mut off = Vec::new();
    for i in 0..n_object {
        let t = i as f64 / n_object.max(1) as f64 * std::f64::consts::TAU;
        let p = [centre[0] + 0.1 * t.cos(), centre[1] + 0.05, centre[2] + 0.1 * t.sin()];
        off.push([centre[0] - p[0], centre[1] - p[1], centre[2] - p[2]]);
        pts.push(p);
    }
    let side = (n_background as f64).sqrt().ceil() as usize;
    for i in 0..n_background {
        let (a, b) = (i % side, i / side);
        let step = 1.0 / (side.max(2) - 1) as f64;
        pts.push([a as f64 * step, 0.0, b as f64 * step]);
        off.push([0.0; 3]);
    }
    (pts, off)
}

/// Points sampled on a single object with their oracle offsets.
pub fn single_object_fixture(n: usize) -> (Vec<P3>, Vec<P3>) {
    let mut pts = Vec::new();
    for i in 0..n {
        let t = i as f64 * 0.7;
        pts.push([
            1.0 + 0.2 * t.cos(),
            2.0 + 0.15 * t.sin(),
            0.3 + 0.1 * (i % 7) as f64 / 7.0,
        ]);
    }
    let c = crate::scenegraph::mean_points(&pts);
    let off = pts.iter().map(|p| [c[0] - p[0], c[1] - p[1], c[2] - p[2]]).collect();
    (pts, off)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_object_passes() {
        let (p, o) = single_object_fixture(200);
        let v = verify_center_consistency(&p, &o, &GeoConfig::default()).unwrap();
        assert_eq!(v.reward, REWARD_OBJECT);
        assert_eq!(v.dominant_fraction, 1.0);
        assert_eq!(v.n_clusters, 1);
    }

    #[test]
    fn mostly_background_fails() {
        let (p, o) = mixed_candidate_fixture(20, 80);
        let v = verify_center_consistency(&p, &o, &GeoConfig::default()).unwrap();
        assert_eq!(v.reward, REWARD_REJECT);
        assert!((v.dominant_fraction - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatch_are_errors() {
        let cfg = GeoConfig::default();
        assert!(matches!(
            verify_center_consistency(&[], &[], &cfg),
            Err(Error::EmptyCandidate)
        ));
        assert!(verify_center_consistency(&[[0.0; 3]], &[], &cfg).is_err());
    }

    #[test]
    fn tiny_candidates_still_collapse() {
        let cfg = GeoConfig::default();
        assert_eq!(cfg.effective_min_pts(3), 3);
        assert_eq!(cfg.effective_min_pts(100), 15);
        let (p, o) = single_object_fixture(3);
        assert_eq!(verify_center_consistency(&p, &o, &cfg).unwrap().reward, REWARD_OBJECT);
    }

    #[test]
    fn defaults() {
        let c = GeoConfig::default();
        assert_eq!((c.r, c.alpha, c.min_pts), (0.05, 0.3, 5));
    }
}
