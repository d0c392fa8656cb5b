//! Linear subspace estimation across the supervision-orthonormality plane.
//!
//! The crate covers the whole family of problems between unsupervised PCA
//! subspace fitting and unconstrained least-squares regression: the synthetic
//! data model, the spectral kernels and orthonormality projections, the five
//! estimators, their error functionals, and a seeded sweep harness that
//! reproduces single- and double-descent curves.

pub mod checks;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod matrix_io;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
