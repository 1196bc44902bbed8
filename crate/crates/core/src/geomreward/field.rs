use std::collections::BTreeMap;
use std::sync::Arc;

use super::regressor::CenterRegressor;
use super::verify::normalize_candidate;
use crate::error::{Error, Result};
use crate::scenegraph::Scene;
use crate::spatial::P3;

/// Offsets from each point to its object's centroid; zero for background.
pub fn center_field_oracle(points: &[P3], instances: &[i32], centroids: &BTreeMap<i32, P3>) -> Result<Vec<P3>> {
    if points.len() != instances.len() {
        return Err(Error::dims(format!(
            "{} points but {} instance ids",
            points.len(),
            instances.len()
        )));
    }
    points
        .iter()
        .zip(instances)
        .map(|(p, &id)| {
            if id < 0 {
                return Ok([0.0; 3]);
            }
            let c = centroids.get(&id).ok_or(Error::UnknownInstance(id))?;
            Ok([c[0] - p[0], c[1] - p[1], c[2] - p[2]])
        })
        .collect()
}

/// Source of per-point center offsets for a candidate, in scene units.
pub trait CenterFieldProvider: Send + Sync {
    /// `points` are the candidate's coordinates; `idx` their scene indices.
    fn offsets(&self, points: &[P3], idx: &[u32]) -> Result<Vec<P3>>;
}

/// Ground-truth field of one scene.
#[derive(Clone, Debug)]
pub struct OracleField {
    offsets: Vec<P3>,
}

impl OracleField {
    pub fn new(scene: &Scene) -> Result<Self> {
        let offsets = center_field_oracle(&scene.points_f64(), &scene.instances, &scene.gt_centroids())?;
        Ok(OracleField { offsets })
    }
}

impl CenterFieldProvider for OracleField {
    fn offsets(&self, _points: &[P3], idx: &[u32]) -> Result<Vec<P3>> {
        idx.iter()
            .map(|&i| {
                self.offsets
                    .get(i as usize)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("point index {i} out of range")))
            })
            .collect()
    }
}

/// Field predicted by a trained regressor on the normalized candidate.
#[derive(Clone, Debug)]
pub struct LearnedField {
    pub model: Arc<CenterRegressor<f32>>,
}

impl CenterFieldProvider for LearnedField {
    fn offsets(&self, points: &[P3], _idx: &[u32]) -> Result<Vec<P3>> {
        let (norm, scale) = normalize_candidate(points)?;
        let pred = self.model.predict(&norm)?;
        Ok(pred
            .into_iter()
            .map(|o| [o[0] / scale, o[1] / scale, o[2] / scale])
            .collect())
    }
}
