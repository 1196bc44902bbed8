//! Engine configuration file: TOML with one table per module.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomreward::GeoConfig;
use crate::policynet::PolicyConfig;
use crate::ppo::{PpoConfig, RolloutMode};
use crate::scenegraph::SegmentConfig;
use crate::synth::{FeatureSpec, SceneSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub seed: u64,
    pub epochs: usize,
    /// Inference episodes per scene.
    pub discover_rollouts: usize,
    /// Merge decisions during inference episodes.
    pub discover_merges: RolloutMode,
    pub segment: SegmentConfig,
    pub geo: GeoConfig,
    pub ppo: PpoConfig,
    pub policy: PolicyConfig,
    pub scene: SceneSpec,
    pub features: FeatureSpec,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seed: 0,
            epochs: 200,
            discover_rollouts: 40,
            discover_merges: RolloutMode::Greedy,
            segment: SegmentConfig::default(),
            geo: GeoConfig::default(),
            ppo: PpoConfig::default(),
            policy: PolicyConfig::default(),
            scene: SceneSpec::default(),
            features: FeatureSpec::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.segment.validate()?;
        self.geo.validate()?;
        self.ppo.validate()?;
        self.policy.validate()?;
        self.scene.validate()?;
        self.features.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Settings used by the synthetic benchmark.
    pub fn benchmark() -> Self {
        let mut c = EngineConfig::default();
        c.segment.k_f = 5.0;
        c.segment.color_weight = 4.0;
        c.scene.room_x = 4.0;
        c.scene.room_y = 4.0;
        c.scene.texture_cell = 1.0;
        c.scene.density = 200.0;
        c.ppo.lr = 1e-3;
        c.ppo.bank_warmup_rollouts = 400;
        c.discover_rollouts = 8;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let c = EngineConfig::benchmark();
        let back = EngineConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(EngineConfig::from_toml("seed = 1\nbogus = 2\n").is_err());
        assert!(EngineConfig::from_toml("[ppo]\nclip = 0.3\n").is_err());
        let c = EngineConfig::from_toml("[ppo]\nclip_ratio = 0.3\n").unwrap();
        assert_eq!(c.ppo.clip_ratio, 0.3);
        assert!(EngineConfig::from_toml("[ppo]\nclip_ratio = 1.5\n").is_err());
    }
}
