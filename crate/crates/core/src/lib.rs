//! Numerical laboratory for the Ricci de Turck flow on rotationally symmetric surfaces.

pub mod audit;
pub mod barriers;
pub mod error;
pub mod exhaustion;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod tensor;

pub use error::{Error, Result};
