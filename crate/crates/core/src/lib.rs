//! Exact recovery of grid-aligned low-rank matrices from noisy samples, and a
//! numerical lab for infinity-norm perturbation bounds of singular subspaces.
//!
//! Index sets over singular triplets are 0-based throughout the API. Cutoffs
//! such as `s` are counts, so `s = 2` keeps the first two triplets.

pub mod coherence;
pub mod contour;
mod error;
pub mod io;
pub mod linalg;
pub mod perturbation;
pub mod problem;
pub mod recovery;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, NormKind, SvdFactors, SymmetrizedSystem};
