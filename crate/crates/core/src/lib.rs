//! Numerical toolkit for Hamiltonian structures on closed 3-manifolds.
//!
//! The crate computes the self-linking number of an exact nowhere-vanishing
//! 2-form, integrates its characteristic flow, searches closed
//! characteristics, probes unique ergodicity with Birkhoff averages and
//! certifies contact type by maximizing a sampled margin over primitives.

pub mod error;
pub mod forms;
pub mod models;
pub mod dynamics;
pub mod ergodic;
pub mod invariants;
pub mod scenario;

pub use error::{CharflowError, Result};
pub use forms::{FormField, IntegralEstimate, Scheme, ScalarFunction};
pub use models::{Model, ModelKind};

/// Chart coordinates; three-dimensional charts leave the last slot zero.
pub type Point = nalgebra::Vector4<f64>;
/// Tangent vector in chart coordinates.
pub type Vector = nalgebra::Vector4<f64>;

pub const GOLDEN_RATIO: f64 = 1.618_033_988_7;
