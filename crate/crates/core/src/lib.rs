//! Learn game graphs from annotated gameplay traces and recombine them into new,
//! playable games by heuristic search over conceptual expansions.

pub mod combine;
pub mod error;
pub mod game;
pub mod graph;
pub mod heuristic;
pub mod ingest;
pub mod level;
pub mod proto;
pub mod rng;
pub mod rules;
pub mod sim;

pub use error::{Error, Result};
