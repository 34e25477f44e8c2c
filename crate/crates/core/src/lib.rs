//! Numerical Kähler geometry on model manifolds.
//!
//! The crate builds explicit Kähler metrics on tori, projective spaces and
//! their products, evaluates curvature and holomorphic sectional curvature,
//! integrates Chern–Weil forms, and runs the Kähler–Ricci flow and the
//! Wu–Yau continuity equation on symmetry-reduced ansätze.

// `!(x > y)` is used on purpose so that NaN fails positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ansatz;
pub mod checks;
pub mod chern;
pub mod classes;
pub mod continuity;
pub mod curvature;
pub mod error;
pub mod exact;
pub mod flow;
pub mod integrator;
pub mod metric;
pub mod quadrature;

pub use error::{KahlerError, Result};
