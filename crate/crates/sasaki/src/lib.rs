//! Pseudo-Hermitian calculus on model Sasakian 3-manifolds: Tanaka–Webster
//! geometry, grid calculus, map energies and tension fields, and the
//! subelliptic harmonic-map heat flow.

pub mod error;
pub mod fields;
pub mod flow;
pub mod geometry;
pub mod jet;
pub mod maps;
pub mod small;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{build_model, Model, ModelKind, ModelParams};
