//! Scenes, superpoints and per-point encoding.

mod adjacency;
pub mod aggregate;
mod encoder;
mod felzenszwalb;
pub mod io;
mod knn;
mod partition;
mod ply;
mod scene;

pub use adjacency::{adjacency_brute_force, compute_adjacency, Adjacency};
pub use aggregate::{aggregate_backward, aggregate_features, members_of};
pub use encoder::{encode_points, encoder_input, encoder_input_dim, EncoderCache, PointEncoder, ENCODER_HIDDEN};
pub use felzenszwalb::felzenszwalb_segment;
pub use io::{load_scene, save_scene, save_scene_with_meta};
pub use knn::{build_knn_graph, edge_weight, Edge};
pub use partition::{build_partition, SegmentConfig, SuperpointPartition};
pub use ply::{export_ply, label_color, ply_string};
pub use scene::{mean_points, Scene};
