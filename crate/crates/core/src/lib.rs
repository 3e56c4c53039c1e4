//! Reduced-order models of two-component structural assemblies.
//!
//! Components are reduced with their free-free eigenmodes plus interface
//! coupling vectors, optionally enriched by shift-invert Arnoldi vectors
//! driven by a residual-force indicator, and scored with the modal
//! assurance criterion against the full assembled model.

// `!(a > b)` comparisons are meant to treat NaN as failing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod coupling;
pub mod eigen;
pub mod enrich;
pub mod error;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod quality;

pub use error::{Error, Result};

/// Library version, recorded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
