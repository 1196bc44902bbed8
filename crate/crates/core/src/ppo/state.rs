use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geomreward::{
    verify_center_consistency, CenterFieldProvider, CenterRegressor, GeoConfig, GeoVerdict, LearnedField, OracleField,
    REWARD_OBJECT,
};
use crate::scenegraph::{build_partition, encoder_input, Scene, SegmentConfig, SuperpointPartition};
use crate::semreward::{build_affinity, cut_cost, Affinity, CandidateMask, CostBank};
use crate::spatial::P3;
use crate::tensor::Mat;

/// Where center offsets come from.
#[derive(Clone, Debug)]
pub enum CenterSource {
    Oracle,
    Learned(Arc<CenterRegressor<f32>>),
}

/// Everything a rollout needs for one scene; the cost bank is the only
/// mutable part.
pub struct SceneState {
    pub scene: Scene,
    pub partition: SuperpointPartition,
    pub affinity: Affinity,
    pub field: Arc<dyn CenterFieldProvider>,
    pub bank: CostBank,
    pub points: Vec<P3>,
    pub enc_input: Mat<f32>,
    /// Point count of each superpoint.
    pub sizes: Vec<f64>,
}

impl SceneState {
    pub fn prepare(scene: Scene, seg: &SegmentConfig, source: &CenterSource, bank_capacity: usize) -> Result<Self> {
        let partition = build_partition(&scene, seg)?;
        Self::from_partition(scene, partition, source, bank_capacity)
    }

    pub fn from_partition(
        scene: Scene,
        partition: SuperpointPartition,
        source: &CenterSource,
        bank_capacity: usize,
    ) -> Result<Self> {
        let affinity = build_affinity(&partition.features, &partition.adjacency)?;
        let field: Arc<dyn CenterFieldProvider> = match source {
            CenterSource::Oracle => Arc::new(OracleField::new(&scene)?),
            CenterSource::Learned(m) => Arc::new(LearnedField { model: m.clone() }),
        };
        let sizes = partition.sizes().into_iter().map(|s| s as f64).collect();
        Ok(SceneState {
            points: scene.points_f64(),
            enc_input: encoder_input(&scene),
            scene,
            partition,
            affinity,
            field,
            bank: CostBank::new(bank_capacity),
            sizes,
        })
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// Point indices covered by the superpoints in `region`, sorted.
    pub fn region_points(&self, region: &[u32]) -> Vec<u32> {
        let mut flags = vec![false; self.k()];
        for &r in region {
            flags[r as usize] = true;
        }
        self.partition.points_of(&flags)
    }

    /// Geometric verdict and cut cost of `region`, without touching the bank.
    pub fn evaluate(&self, region: &[u32], geo: &GeoConfig) -> Result<(GeoVerdict, f64)> {
        let idx = self.region_points(region);
        let pts: Vec<P3> = idx.iter().map(|&i| self.points[i as usize]).collect();
        let offsets = self.field.offsets(&pts, &idx)?;
        let verdict = verify_center_consistency(&pts, &offsets, geo)?;
        let cost = cut_cost(&self.affinity, &CandidateMask::new(region.to_vec(), self.k())?)?;
        Ok((verdict, cost))
    }

    /// Scores `region` with both reward modules, updating the cost bank.
    pub fn score(&mut self, region: &[u32], geo: &GeoConfig) -> Result<Score> {
        let (verdict, cost) = self.evaluate(region, geo)?;
        let sem_threshold = if self.bank.is_full() { self.bank.max() } else { None };
        let sem_reward = self.bank.update(cost);
        Ok(Score {
            geo: verdict,
            cost,
            sem_reward,
            sem_threshold,
            fused: fuse_rewards(verdict.reward, sem_reward),
        })
    }
}

/// The higher of the two module rewards.
pub fn fuse_rewards(geo: i32, sem: i32) -> i32 {
    geo.max(sem)
}

/// Which module granted a positive reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardSource {
    Geo,
    Sem,
    Both,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub geo: GeoVerdict,
    pub cost: f64,
    pub sem_reward: i32,
    /// Bank maximum the cost was compared against; `None` while the bank
    /// still had room.
    pub sem_threshold: Option<f64>,
    pub fused: i32,
}

impl Score {
    pub fn source(&self) -> RewardSource {
        match (self.geo.reward == REWARD_OBJECT, self.sem_reward == REWARD_OBJECT) {
            (true, true) => RewardSource::Both,
            (true, false) => RewardSource::Geo,
            (false, true) => RewardSource::Sem,
            (false, false) => RewardSource::None,
        }
    }

    /// `max(dominant_fraction, 1 − cost)` clamped to `(0, 1]`.
    pub fn confidence(&self) -> f64 {
        crate::discovery::confidence(self.geo.dominant_fraction, self.cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fusion_keeps_the_higher_reward() {
        assert_eq!(fuse_rewards(10, -1), 10);
        assert_eq!(fuse_rewards(-1, 10), 10);
        assert_eq!(fuse_rewards(-1, -1), -1);
        assert_eq!(fuse_rewards(10, 10), 10);
    }
}
