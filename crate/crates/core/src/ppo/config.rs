use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub clip_ratio: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub coef_policy: f64,
    pub coef_value: f64,
    pub coef_entropy: f64,
    pub lr: f64,
    pub batch_scenes: usize,
    pub crop_radius: f64,
    pub crop_retries: usize,
    pub t_max: usize,
    /// Gradient steps per collected batch.
    pub ppo_epochs: usize,
    pub adv_eps: f64,
    pub bank_capacity: usize,
    /// Rollouts per scene, without learning, that seed the cost bank before
    /// the first update.
    pub bank_warmup_rollouts: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_ratio: 0.2,
            gae_lambda: 0.9,
            gamma: 0.9,
            coef_policy: 1.0,
            coef_value: 1.0,
            coef_entropy: 0.1,
            lr: 1e-4,
            batch_scenes: 5,
            crop_radius: 1.0,
            crop_retries: 10,
            t_max: 5,
            ppo_epochs: 1,
            adv_eps: 1e-8,
            bank_capacity: 20,
            bank_warmup_rollouts: 20,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo: {m}")));
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad("clip_ratio must lie in (0,1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) || !(0.0..=1.0).contains(&self.gamma) {
            return bad("gae_lambda and gamma must lie in [0,1]");
        }
        if !(self.lr >= 0.0) || !(self.crop_radius > 0.0) {
            return bad("lr must be >= 0 and crop_radius > 0");
        }
        if self.batch_scenes == 0 || self.t_max == 0 || self.ppo_epochs == 0 || self.bank_capacity == 0 {
            return bad("batch_scenes, t_max, ppo_epochs and bank_capacity must be >= 1");
        }
        Ok(())
    }
}
