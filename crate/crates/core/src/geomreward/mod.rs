//! Geometric objectness: center fields, density clustering and the
//! center-consistency verdict.

mod dbscan;
mod field;
mod regressor;
mod sampler;
mod verify;

pub use dbscan::{cluster_sizes, dbscan};
pub use field::{center_field_oracle, CenterFieldProvider, LearnedField, OracleField};
pub use regressor::{train_center_regressor, CenterRegressor, RegressorCache, RegressorTrainConfig, CENTER_MAGIC};
pub use sampler::{make_center_training_sample, visible_points, CenterSample, SamplerConfig, View};
pub use verify::{
    mixed_candidate_fixture, normalize_candidate, single_object_fixture, verify_center_consistency, GeoConfig,
    GeoVerdict, REWARD_OBJECT, REWARD_REJECT,
};
