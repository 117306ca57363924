//! Scalar nonlinearities and their optimal piecewise-affine approximation.

mod catalog;
mod partition;
mod table;

pub use catalog::{Flags, Nonlinearity, NonlinearityKind, PolyTerm, ASYMPTOTE_TOL};
pub use partition::{
    build_partition, build_partition_with_levels, derivative_image_length, evaluate_pwa,
    required_partition_size, verify_error_lipschitz, PwaApproximation, CONTINUITY_TOL,
    EMPIRICAL_ETA_SLACK,
};
pub use table::{Table, TABLE_CONSISTENCY_TOL};
