//! Diffusion limited aggregation on the cylinder `G x N` over a finite
//! regular graph `G`, with the spectral and one-dimensional walk tools
//! used to analyse it.

pub mod dla;
pub mod experiment;
pub mod graph;
pub mod render;
pub mod rng;
pub mod snapshot;
pub mod spectral;
pub mod stats;
pub mod verify;
pub mod walk;
pub mod walk1d;

pub use graph::{GraphError, GraphSpec, RegularGraph};
pub use stats::{BoundCheck, Direction, EstimateSummary, Verdict};
