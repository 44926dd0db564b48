//! Numerical verification engine for the finite-dimensional reduction of the
//! prescribed scalar curvature problem `L u = K u^p` on the round sphere `S^n`.
//!
//! The crate evaluates, for weighted sums of standard bubbles, the reduced
//! energy and gradient expansions, compares them with direct quadrature of the
//! full functional, solves the reduced critical-point equations and scans
//! configurations that the theory excludes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubbles;
pub mod constants;
pub mod decomposition;
pub mod error;
pub mod expansion;
pub mod geometry;
pub mod oracle;
pub mod scan;
pub mod solver;

pub use bubbles::{Bubble, BubbleJet, Configuration};
pub use constants::{AuditReport, AuditStatus, ConstantTable, Constants};
pub use error::{Error, Result};
pub use geometry::{
    CriticalPoint, CurvatureField, GridSpec, KJet, QuadratureGrid, SphereModel, SpherePoint,
    TangentFrame,
};
