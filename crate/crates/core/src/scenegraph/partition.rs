use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_features, members_of};
use super::{build_knn_graph, compute_adjacency, felzenszwalb_segment, Adjacency, Scene};
use crate::error::{Error, Result};
use crate::spatial::P3;
use crate::tensor::Mat;

/// Knobs for superpoint construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub knn_k: usize,
    pub color_weight: f64,
    pub k_f: f64,
    pub min_size: usize,
    pub adjacency_dist: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            knn_k: 16,
            color_weight: 0.2,
            k_f: 0.05,
            min_size: 20,
            adjacency_dist: 0.1,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.knn_k == 0 || self.min_size == 0 {
            return Err(Error::Config("knn_k and min_size must be >= 1".into()));
        }
        if !(self.k_f > 0.0) || !(self.adjacency_dist > 0.0) || !(self.color_weight >= 0.0) {
            return Err(Error::Config(
                "k_f and adjacency_dist must be > 0, color_weight >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Disjoint superpoints covering every point of a scene.
#[derive(Clone, Debug)]
pub struct SuperpointPartition {
    pub assignment: Vec<u32>,
    pub members: Vec<Vec<u32>>,
    pub centroids: Vec<P3>,
    /// Mean semantic feature per superpoint (`K × D`, `D` may be 0).
    pub features: Mat<f32>,
    pub adjacency: Adjacency,
}

impl SuperpointPartition {
    /// Wraps an existing assignment whose labels are `0..K` with none unused.
    pub fn from_assignment(scene: &Scene, assignment: Vec<u32>, adjacency_dist: f64) -> Result<Self> {
        if assignment.len() != scene.len() {
            return Err(Error::dims(format!(
                "assignment has {} entries for {} points",
                assignment.len(),
                scene.len()
            )));
        }
        if scene.is_empty() {
            return Err(Error::EmptyScene);
        }
        let k = *assignment.iter().max().unwrap() as usize + 1;
        let members = members_of(&assignment, k);
        if members.iter().any(|m| m.is_empty()) {
            return Err(Error::InvalidArgument("superpoint labels are not contiguous".into()));
        }
        let centroids = members
            .iter()
            .map(|m| super::scene::mean_of(m.iter().map(|&i| scene.point(i as usize)).collect::<Vec<_>>().iter()))
            .collect();
        let per_point = Mat::from_vec(scene.len(), scene.feat_dim, scene.features.clone());
        let features = aggregate_features(&members, &per_point);
        let adjacency = compute_adjacency(&assignment, k, scene, adjacency_dist)?;
        Ok(SuperpointPartition {
            assignment,
            members,
            centroids,
            features,
            adjacency,
        })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Point indices covered by the superpoints flagged in `mask`, sorted.
    pub fn points_of(&self, mask: &[bool]) -> Vec<u32> {
        let mut pts: Vec<u32> = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .flat_map(|(k, _)| self.members[k].iter().copied())
            .collect();
        pts.sort_unstable();
        pts
    }
}

/// Felzenszwalb superpoints plus adjacency for `scene`.
pub fn build_partition(scene: &Scene, cfg: &SegmentConfig) -> Result<SuperpointPartition> {
    cfg.validate()?;
    let edges = build_knn_graph(scene, cfg.knn_k, cfg.color_weight)?;
    let assignment = felzenszwalb_segment(&edges, scene.len(), cfg.k_f, cfg.min_size);
    SuperpointPartition::from_assignment(scene, assignment, cfg.adjacency_dist)
}
