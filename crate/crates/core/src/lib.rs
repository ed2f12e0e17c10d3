//! Single-regression Granger causality for vector autoregressions: point
//! and band-limited estimators, their generalised χ² null laws, and the
//! projection test.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bivar;
pub mod error;
pub mod gc;
pub mod inference;
pub mod linalg;
pub mod null_dist;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod var_model;

pub use error::{Error, Result};
