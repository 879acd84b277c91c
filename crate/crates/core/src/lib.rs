//! Spectral laboratory for the Dirichlet Laplacian on broken sheared
//! waveguides: essential-spectrum thresholds, discrete eigenvalues below
//! them, and eigenvalue counts, computed with structured finite elements and
//! matrix-free block eigensolvers.

pub mod assembly;
pub mod certificates;
pub mod cross_section;
pub mod eigcore;
pub mod error;
pub mod geometry;
pub mod sparse;
pub mod thresholds;
pub mod waveguide;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
