//! Layers with hand-written backward passes.
//!
//! Every forward returns a cache holding exactly what its backward needs;
//! gradients accumulate into a parameter-shaped struct of the same type.

mod adam;
mod attention;
mod checkpoint;
mod layers;
mod params;

pub mod gradcheck;

pub use adam::Adam;
pub use attention::{Block, BlockCache};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint, TensorEntry, CHECKPOINT_VERSION};
pub use layers::{gelu, gelu_grad, LayerNorm, Linear, LnCache, Mlp, MlpCache};
pub use params::{assign_flat, flatten, num_params, zero_grad, Params};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{Mat, Real};

/// Gaussian init with standard deviation `1/sqrt(fan_in)`.
pub fn init_weight<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat<T> {
    let std = 1.0 / (rows.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("valid std");
    Mat::from_fn(rows, cols, |_, _| T::c(normal.sample(rng)))
}
