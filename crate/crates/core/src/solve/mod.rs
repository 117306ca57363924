//! Solving assembled problems and the end-to-end certification pipeline.

mod clarabel_backend;
mod command_backend;

use std::time::{Duration, Instant};

pub use clarabel_backend::ClarabelBackend;
pub use command_backend::CommandBackend;

use crate::error::{Error, Result};
use crate::lmi::{
    assemble_pwq_lmis, extract_certificate, AssemblyOptions, Census, Certificate, LmiProblem,
    ProblemResiduals, RowKind,
};
use crate::nonlin::{
    build_partition, build_partition_with_levels, verify_error_lipschitz, PwaApproximation,
};
use crate::reformulate::{augment, to_pwa_lure, AugmentedSystem, LureSystem};
use crate::verify::{check_certificate, CheckReport};

/// Environment variable overriding the solver feasibility tolerance.
pub const TOLERANCE_ENV: &str = "LUREPWA_SOLVER_TOL";

/// Tolerance of the independent eigenvalue check that gates certification.
pub const CHECK_TOLERANCE: f64 = 1e-7;

/// Cap on σ₂, relative to the certifying point, during decay refinement.
pub const DECAY_SIGMA2_FACTOR: f64 = 10.0;

/// Grid used to confirm the approximation's error slope before assembly.
const APPROX_GRID: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tolerance: f64,
    pub max_iterations: u32,
    /// Normalize every constraint by its largest coefficient before solving.
    pub scaling: bool,
    /// `clarabel`, or `command:<program>` for an external solver.
    pub backend_name: String,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tolerance: 1e-8,
            max_iterations: 200,
            scaling: true,
            backend_name: "clarabel".into(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.feasibility_tolerance > 0.0 && self.feasibility_tolerance.is_finite()) {
            return Err(Error::Argument(format!(
                "solver tolerance must be positive, got {}",
                self.feasibility_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Applies `LUREPWA_SOLVER_TOL` when set.
    pub fn with_env_overrides(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(TOLERANCE_ENV) {
            self.feasibility_tolerance = v
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("{TOLERANCE_ENV}={v} is not a number")))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn backend(&self) -> Result<Box<dyn Backend>> {
        match self.backend_name.as_str() {
            "clarabel" => Ok(Box::new(ClarabelBackend)),
            other => match other.strip_prefix("command:") {
                Some(cmd) => {
                    let mut parts = cmd.split_whitespace().map(str::to_string);
                    let program = parts
                        .next()
                        .ok_or_else(|| Error::Argument("empty backend command".into()))?;
                    Ok(Box::new(CommandBackend {
                        program,
                        args: parts.collect(),
                    }))
                }
                None => Err(Error::Argument(format!("unknown backend `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendStatus {
    Feasible,
    Infeasible,
    Failure,
}

#[derive(Debug, Clone)]
pub struct BackendResult {
    pub status: BackendStatus,
    pub x: Vec<f64>,
    /// Backend's own status string.
    pub raw_status: String,
    pub log: String,
}

/// A conic solver accepting the structured problem (or its text form).
pub trait Backend {
    fn name(&self) -> &str;
    fn solve(&self, problem: &LmiProblem, opts: &SolverOptions) -> Result<BackendResult>;
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(Box<Certificate>),
    /// The backend proved infeasibility to its tolerance.
    Infeasible {
        status: String,
    },
    /// Divergence, iteration limit, or a claimed solution that violates the problem.
    Failure {
        status: String,
        log: String,
    },
}

/// Solves the problem and checks the returned point against every constraint.
pub fn solve_problem(
    problem: &LmiProblem,
    opts: &SolverOptions,
) -> Result<(BackendResult, ProblemResiduals)> {
    opts.validate()?;
    let backend = opts.backend()?;
    let result = backend.solve(problem, opts)?;
    let residuals = if result.status == BackendStatus::Feasible {
        problem.residuals(&result.x)
    } else {
        ProblemResiduals::default()
    };
    Ok((result, residuals))
}

pub fn solve_feasibility(problem: &LmiProblem, opts: &SolverOptions) -> Result<Feasibility> {
    let (result, residuals) = solve_problem(problem, opts)?;
    Ok(match result.status {
        BackendStatus::Feasible if residuals.max() <= CHECK_TOLERANCE => {
            let cert = extract_certificate(problem, &result.x, &result.raw_status)?;
            Feasibility::Feasible(Box::new(cert))
        }
        BackendStatus::Feasible => Feasibility::Failure {
            status: result.raw_status,
            log: format!(
                "{}; returned point violates the problem by {:e}",
                result.log,
                residuals.max()
            ),
        },
        BackendStatus::Infeasible => Feasibility::Infeasible {
            status: result.raw_status,
        },
        BackendStatus::Failure => Feasibility::Failure {
            status: result.raw_status,
            log: result.log,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Certified,
    /// Inconclusive: the sufficient conditions could not be met.
    NotCertified,
    SolverFailure,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Certified => "certified",
            Outcome::NotCertified => "not_certified",
            Outcome::SolverFailure => "solver_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub eta_ref: f64,
    /// Use exactly this many regions (odd) instead of deriving N from eta_ref.
    pub force_regions: Option<usize>,
    pub assembly: AssemblyOptions,
    pub solver: SolverOptions,
    pub check_tolerance: f64,
    /// After certification, re-solve for the largest σ₃ with σ₂ capped at
    /// DECAY_SIGMA2_FACTOR times its first value, so the decay envelope is
    /// informative. The refined point is kept only if it passes the check.
    pub tighten_decay: bool,
}

impl CertifyOptions {
    pub fn new(eta_ref: f64) -> Self {
        CertifyOptions {
            eta_ref,
            force_regions: None,
            assembly: AssemblyOptions::default(),
            solver: SolverOptions::default(),
            check_tolerance: CHECK_TOLERANCE,
            tighten_decay: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub outcome: Outcome,
    pub approx: PwaApproximation,
    pub census: Census,
    pub certificate: Option<Certificate>,
    pub check: Option<CheckReport>,
    pub solver_status: String,
    pub detail: String,
    pub wall_time: Duration,
}

impl CertifyReport {
    pub fn regions(&self) -> usize {
        self.approx.regions()
    }

    pub fn eta(&self) -> f64 {
        self.approx.eta
    }
}

/// Approximation used by `certify`: derived from eta_ref, or with N forced.
pub fn approximation_for(sys: &LureSystem, opts: &CertifyOptions) -> Result<PwaApproximation> {
    match opts.force_regions {
        Some(big) if big % 2 == 1 => build_partition_with_levels(&sys.nl, big / 2),
        Some(big) => Err(Error::Argument(format!(
            "forced region count must be odd, got {big}"
        ))),
        None => build_partition(&sys.nl, opts.eta_ref),
    }
}

/// Builds everything up to the assembled problem.
pub fn prepare(
    sys: &LureSystem,
    opts: &CertifyOptions,
) -> Result<(PwaApproximation, AugmentedSystem, LmiProblem)> {
    let approx =
        approximation_for(sys, opts).map_err(|e| e.context("building the approximation"))?;
    verify_error_lipschitz(&sys.nl, &approx, APPROX_GRID)
        .map_err(|e| e.context("checking the approximation"))?;
    let aug = augment(&to_pwa_lure(sys, &approx)?);
    let problem = assemble_pwq_lmis(&aug, approx.eta, &opts.assembly)?;
    Ok((approx, aug, problem))
}

/// Approximate, reformulate, assemble, solve and independently check.
pub fn certify(sys: &LureSystem, opts: &CertifyOptions) -> Result<CertifyReport> {
    let start = Instant::now();
    if !sys.nl.flags().assumption1() {
        return Err(Error::AssumptionViolation(
            "nonlinearity must be C1 and asymptotically linear".into(),
        ));
    }
    let (approx, aug, problem) = prepare(sys, opts)?;
    let census = problem.census();
    let mut report = CertifyReport {
        outcome: Outcome::NotCertified,
        approx,
        census,
        certificate: None,
        check: None,
        solver_status: String::new(),
        detail: String::new(),
        wall_time: Duration::ZERO,
    };
    match solve_feasibility(&problem, &opts.solver)? {
        Feasibility::Feasible(cert) => {
            let mut cert = *cert;
            let mut check = check_certificate(&cert, &aug, opts.check_tolerance);
            report.solver_status = cert.solver_status.clone();
            if check.passed {
                report.outcome = Outcome::Certified;
                let mut refined_note = "";
                if opts.tighten_decay {
                    if let Some(refined) = refine_decay(&problem, &cert, &opts.solver)? {
                        let again = check_certificate(&refined, &aug, opts.check_tolerance);
                        if again.passed {
                            cert = refined;
                            check = again;
                            refined_note = "; decay refined";
                        }
                    }
                }
                report.detail = format!("max residual {:e}{refined_note}", check.max_residual);
            } else {
                report.outcome = Outcome::SolverFailure;
                report.detail = format!(
                    "solver point fails the independent check: {} = {:e}",
                    check.worst, check.max_residual
                );
            }
            report.check = Some(check);
            report.certificate = Some(cert);
        }
        Feasibility::Infeasible { status } => {
            report.detail = "conditions infeasible; stability is not decided".into();
            report.solver_status = status;
        }
        Feasibility::Failure { status, log } => {
            report.outcome = Outcome::SolverFailure;
            report.solver_status = status;
            report.detail = log;
        }
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Largest σ₃ over the feasible set with σ₂ ≤ DECAY_SIGMA2_FACTOR·σ₂ of `cert`;
/// `None` when the second solve does not return a usable point.
fn refine_decay(
    problem: &LmiProblem,
    cert: &Certificate,
    opts: &SolverOptions,
) -> Result<Option<Certificate>> {
    let sigma = &problem.index.sigma;
    if sigma.len() != 3 {
        return Ok(None);
    }
    let s2 = problem.var(sigma[1]).offset;
    let s3 = problem.var(sigma[2]).offset;
    let mut p = problem.clone();
    p.objective = vec![(s3, -1.0)];
    p.push_row(
        "sigma2<=cap",
        RowKind::Geq,
        vec![(None, DECAY_SIGMA2_FACTOR * cert.sigma.1), (Some(s2), -1.0)],
    );
    Ok(match solve_feasibility(&p, opts)? {
        Feasibility::Feasible(c) => Some(*c),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::lmi::{LmiProblem, Sense, VarKind};

    #[test]
    fn contradictory_problem_is_infeasible() {
        let mut p = LmiProblem::default();
        let v = p.add_var("P", VarKind::Symmetric { dim: 2 });
        let eye = Mat::identity(2, 2);
        let a = p
            .expr(2, 2)
            .var(v, &eye, &eye, (0, 0), 1.0, false)
            .constant(0, 0, &(-&eye))
            .build();
        p.push_block("P>=I", Sense::Psd, a).unwrap();
        let b = p
            .expr(2, 2)
            .var(v, &eye, &eye, (0, 0), 1.0, false)
            .constant(0, 0, &eye)
            .build();
        p.push_block("P<=-I", Sense::Nsd, b).unwrap();
        let (r, _) = solve_problem(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, BackendStatus::Infeasible, "{}", r.raw_status);
    }

    #[test]
    fn simple_problem_is_solved() {
        let mut p = LmiProblem::default();
        let v = p.add_var("P", VarKind::Symmetric { dim: 2 });
        let eye = Mat::identity(2, 2);
        let a = p
            .expr(2, 2)
            .var(v, &eye, &eye, (0, 0), 1.0, false)
            .constant(0, 0, &(-&eye))
            .build();
        p.push_block("P>=I", Sense::Psd, a).unwrap();
        // minimize trace P
        p.objective = vec![(0, 1.0), (2, 1.0)];
        let (r, res) = solve_problem(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, BackendStatus::Feasible);
        assert!(res.max() < 1e-7);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && r.x[1].abs() < 1e-6);
    }

    #[test]
    fn options_validation() {
        let bad = SolverOptions {
            feasibility_tolerance: 0.0,
            ..SolverOptions::default()
        };
        assert!(bad.validate().is_err());
        let other = SolverOptions {
            backend_name: "nope".into(),
            ..SolverOptions::default()
        };
        assert!(other.backend().is_err());
    }
}
