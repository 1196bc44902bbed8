//! Trajectory collection, GAE and clipped policy-gradient training.

mod config;
mod loss;
mod rollout;
mod state;
mod train;

pub use config::PpoConfig;
pub use loss::{
    add_params, build_targets, clip_objective, gae, log_probs, ppo_loss, ppo_update, scene_loss, LossStats, SceneSteps,
    StepTarget,
};
pub use rollout::{
    collect_trajectory, region_feature, seed_crop, superpoint_features, RolloutMode, Step, StepAction, Trajectory,
};
pub use state::{fuse_rewards, CenterSource, RewardSource, SceneState, Score};
pub use train::{episode_seed, metrics_jsonl, train, warm_up_banks, EpochMetrics, TrainOutput};
