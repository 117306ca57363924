//! Assembly of the piecewise-quadratic Lyapunov LMIs and their certificates.

mod assemble;
mod certificate;
mod problem;

pub use assemble::{
    assemble_circle_criterion, assemble_pwq_lmis, lift_diagonal, s_procedure_rows, AssemblyOptions,
    Census, DeltaPWeighting, Objective, SProcedureRows,
};
pub use certificate::{extract_certificate, Certificate, Multipliers};
pub use problem::{
    Built, Expr, LinearRow, LmiBlock, LmiProblem, ProblemResiduals, RowKind, Sense, Slot, VarId,
    VarKind, Variable,
};
