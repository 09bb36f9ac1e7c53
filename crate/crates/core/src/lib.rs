//! Circuit-level simulation of a block-encoding eigensolver for the graph
//! Laplacian of a fully connected Gaussian-weighted graph.
//!
//! The pipeline builds purified density operators whose reduced states carry
//! the weight and degree matrices, combines their block-encodings into an
//! encoding of `L / Tr(L)`, simulates `exp(−i𝓛t)` and reads the spectrum out
//! with phase estimation. Every quantum object is checked against the exact
//! classical matrices in [`graph`].

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arith;
pub mod block;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod ops;
pub mod prep;
pub mod qsim;
pub mod spectral;

pub use error::{Error, Result};

/// Tolerance for accepting a matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for state normalisation.
pub const NORM_TOL: f64 = 1e-10;
