//! Wave-based crack detection toolkit: a dynamic lattice element simulator
//! for 2D plates, parametric cracks with label rasterization, a deterministic
//! dataset factory, and the loss/metric stack used to score crack predictions.

pub mod crack;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod metrics;

pub use error::{Error, ErrorClass, Result};
