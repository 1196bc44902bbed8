#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod discovery;
pub mod error;
pub mod evalap;
pub mod geomreward;
pub mod nn;
pub mod par;
pub mod policynet;
pub mod ppo;
pub mod rng;
pub mod scenegraph;
pub mod semreward;
pub mod spatial;
pub mod suite;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
