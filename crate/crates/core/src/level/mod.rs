//! Probabilistic level design model: observed G/D/N values, hidden S/L clusters,
//! the conditional placement table and chunk sequencing.

pub mod kmeans;
mod model;
mod observe;
mod sample;

pub use kmeans::{estimate_k, kmeans, kmedians, Clustering};
pub use model::{
    learn_model, model_from_graph, quantize, runs, LNode, LevelDesignModel, Outcome, Repeats,
    SNode, ShapeOption, TypeInfo, K_MAX, OFFSET_CELL,
};
pub use observe::{extract_observations, DValue, GValue, NValue, Observations, SpriteTypes};
pub use sample::{sample_chunk, SampledChunk, SAMPLE_CAP};
pub(crate) use sample::pick_weighted;
