//! Synthetic scenes, semantic features and center-regressor data.

mod features;
mod scene;
pub mod shapes;

use crate::error::Result;
use crate::geomreward::{make_center_training_sample, CenterSample, SamplerConfig};
use crate::par;
use crate::rng::stream;

pub use features::{attach_features, class_embeddings, gen_semantic_features, FeatureSpec};
pub use scene::{gen_scene, gen_scenes, parse_classes, scene_name, SceneSpec, SynthScene};
pub use shapes::{Archetype, Primitive, Shape};

/// `n` samples for the center regressor, sample `i` drawn from stream `i`.
pub fn gen_center_training_set(
    n: usize,
    archetypes: &[Archetype],
    cfg: &SamplerConfig,
    master: u64,
) -> Result<Vec<CenterSample>> {
    par::map_range(n, |i| {
        make_center_training_sample(archetypes, cfg, &mut stream(master, i as u64))
    })
    .into_iter()
    .collect()
}
