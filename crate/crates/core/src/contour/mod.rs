//! Contour-integral machinery for the resolvent expansion: circle contours,
//! integral coefficients by residues and by quadrature, the index-tuple
//! partitions, brute-force term assembly, and coefficient bound checks.

mod bounds;
mod expansion;
mod geometry;
mod partitions;
mod quadrature;
mod residue;
mod resolvent;

pub use bounds::{coefficient_bound, coefficient_bound_local, verify_coefficient_bounds, CoeffSample, CoeffVerifyReport};
pub use expansion::{expansion_consistency_check, ExpansionCheck, MAX_EXPANSION_GAMMA, MAX_EXPANSION_RANK};
pub use geometry::{Circle, ContourSpec, DEFAULT_NODE_COUNT};
pub use partitions::{enumerate_partitions, partition_count, Partition};
pub use quadrature::{contour_integral, contour_integral_with_peak, integral_coefficient_quadrature};
pub use residue::{integral_coefficient_residue, signed_value, Field};
pub use resolvent::{resolvent_terms, ResolventTerms};
