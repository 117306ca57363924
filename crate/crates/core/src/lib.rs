//! Incremental asymptotic stability certificates for Lur'e systems.
//!
//! The scalar feedback nonlinearity φ is replaced by an optimal continuous
//! piecewise-affine approximation whose error ε = φ − φ_PWA has a guaranteed
//! Lipschitz constant η. The Lur'e loop is then rewritten as a PWA system
//! driven by ε, and a continuous piecewise-quadratic incremental Lyapunov
//! function is searched for through a semidefinite feasibility problem.
//!
//! Pipeline:
//!
//! ```text
//! Nonlinearity ──build_partition──▶ PwaApproximation
//!      LureSystem + approximation ──to_pwa_lure──▶ PwaLureSystem ──augment──▶ AugmentedSystem
//!      AugmentedSystem ──assemble_pwq_lmis──▶ LmiProblem ──solve_feasibility──▶ Certificate
//!      Certificate ──check_certificate / simulate_pair / check_decrease──▶ independent evidence
//! ```
//!
//! A negative answer from the LMIs is inconclusive; the conditions are only
//! sufficient.

pub mod error;
pub mod linalg;
pub mod lmi;
pub mod nonlin;
pub mod ode;
pub mod reformulate;
pub mod solve;
pub mod verify;

pub use error::{Error, Result};
pub use lmi::{
    assemble_circle_criterion, assemble_pwq_lmis, lift_diagonal, AssemblyOptions, Certificate,
    DeltaPWeighting, LmiProblem, SProcedureRows,
};
pub use nonlin::{
    build_partition, build_partition_with_levels, derivative_image_length, evaluate_pwa,
    required_partition_size, verify_error_lipschitz, Nonlinearity, NonlinearityKind,
    PwaApproximation,
};
pub use reformulate::{
    augment, cell_polyhedron, facet_adjacency, to_pwa_lure, AugmentedSystem, LureSystem,
    PwaLureSystem,
};
pub use solve::{
    certify, solve_feasibility, CertifyOptions, CertifyReport, Outcome, SolverOptions,
};
pub use verify::{check_certificate, check_decrease, evaluate_v, hinf_channel_gain, simulate_pair};
