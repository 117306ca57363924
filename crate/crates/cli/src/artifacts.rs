//! JSON artifacts written and read by the CLI.
//!
//! Every artifact carries a `schema` tag. Reals are written with shortest
//! round-trip formatting, so re-reading reproduces them bit for bit.

use std::collections::BTreeMap;

use lurepwa::lmi::{Census, Multipliers, Objective};
use lurepwa::solve::CertifyReport;
use lurepwa::verify::{CheckReport, SampleReport};
use lurepwa::{
    evaluate_pwa, AssemblyOptions, Certificate, DeltaPWeighting, Nonlinearity, PwaApproximation,
    SProcedureRows,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::schema::{mat_from_rows, mat_to_rows, SystemDescription};
use crate::CliError;

pub const APPROXIMATION_SCHEMA: &str = "lurepwa/approximation/1";
pub const CERTIFICATE_SCHEMA: &str = "lurepwa/certificate/1";
pub const REPORT_SCHEMA: &str = "lurepwa/report/1";
pub const CHECK_SCHEMA: &str = "lurepwa/check/1";
pub const PAIRS_SCHEMA: &str = "lurepwa/pairs/1";

/// Points in the dense plotting table.
pub const TABLE_POINTS: usize = 2001;

type Rows = Vec<Vec<f64>>;

pub trait Artifact: Serialize + DeserializeOwned {
    const SCHEMA: &'static str;
    fn schema(&self) -> &str;

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifacts serialize")
    }

    fn from_json(text: &str) -> Result<Self, CliError> {
        let a: Self = serde_json::from_str(text)
            .map_err(|e| CliError::schema(format!("{}: {e}", Self::SCHEMA)))?;
        if a.schema() != Self::SCHEMA {
            return Err(CliError::schema(format!(
                "unsupported schema `{}` (expected `{}`)",
                a.schema(),
                Self::SCHEMA
            )));
        }
        Ok(a)
    }
}

macro_rules! artifact {
    ($t:ty, $s:expr) => {
        impl Artifact for $t {
            const SCHEMA: &'static str = $s;
            fn schema(&self) -> &str {
                &self.schema
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxData {
    pub regions: usize,
    pub eta: f64,
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl From<&PwaApproximation> for ApproxData {
    fn from(a: &PwaApproximation) -> Self {
        ApproxData {
            regions: a.regions(),
            eta: a.eta,
            breakpoints: a.breakpoints.clone(),
            slopes: a.slopes.clone(),
            intercepts: a.intercepts.clone(),
        }
    }
}

impl ApproxData {
    pub fn to_approximation(&self) -> Result<PwaApproximation, CliError> {
        let a = PwaApproximation {
            breakpoints: self.breakpoints.clone(),
            slopes: self.slopes.clone(),
            intercepts: self.intercepts.clone(),
            eta: self.eta,
        };
        a.validate()?;
        if a.regions() != self.regions {
            return Err(CliError::schema(format!(
                "approximation claims {} regions but has {}",
                self.regions,
                a.regions()
            )));
        }
        Ok(a)
    }
}

/// Columns (q, φ, φ_PWA, ε) for overlay plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxTable {
    pub q: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_pwa: Vec<f64>,
    pub eps: Vec<f64>,
}

impl ApproxTable {
    /// Uniform grid over ±1.5·max(1, |breakpoints|).
    pub fn sample(nl: &Nonlinearity, approx: &PwaApproximation, points: usize) -> Self {
        let half = 1.5
            * approx
                .breakpoints
                .iter()
                .fold(1.0_f64, |m, b| m.max(b.abs()));
        let q: Vec<f64> = (0..points)
            .map(|k| -half + 2.0 * half * k as f64 / (points - 1) as f64)
            .collect();
        let phi: Vec<f64> = q.iter().map(|&v| nl.eval(v)).collect();
        let phi_pwa: Vec<f64> = q.iter().map(|&v| evaluate_pwa(approx, v)).collect();
        let eps = phi.iter().zip(&phi_pwa).map(|(a, b)| a - b).collect();
        ApproxTable {
            q,
            phi,
            phi_pwa,
            eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximationArtifact {
    pub schema: String,
    pub system: String,
    pub eta_ref: f64,
    pub approximation: ApproxData,
    /// Largest |φ′ − φ′_PWA| found on a dense grid; never above eta.
    pub max_error_slope: f64,
    pub table: ApproxTable,
}
artifact!(ApproximationArtifact, APPROXIMATION_SCHEMA);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyData {
    pub sigma_min: f64,
    pub swap_symmetry: bool,
    pub zero_diagonal_multipliers: bool,
    /// `incremental` or `identity`.
    pub delta_p: String,
    /// `with_constant` or `cell_only`.
    pub s_rows: String,
    /// `sigma_gap` or `feasibility`.
    pub objective: String,
    pub facial_reduction: bool,
}

impl From<&AssemblyOptions> for AssemblyData {
    fn from(o: &AssemblyOptions) -> Self {
        AssemblyData {
            sigma_min: o.sigma_min,
            swap_symmetry: o.swap_symmetry,
            zero_diagonal_multipliers: o.zero_diagonal_multipliers,
            delta_p: match o.delta_p {
                DeltaPWeighting::Incremental => "incremental",
                DeltaPWeighting::Identity => "identity",
            }
            .into(),
            s_rows: match o.s_rows {
                SProcedureRows::WithConstant => "with_constant",
                SProcedureRows::CellOnly => "cell_only",
            }
            .into(),
            objective: match o.objective {
                Objective::SigmaGap => "sigma_gap",
                Objective::Feasibility => "feasibility",
            }
            .into(),
            facial_reduction: o.facial_reduction,
        }
    }
}

impl AssemblyData {
    fn to_options(&self) -> Result<AssemblyOptions, CliError> {
        let bad = |field: &str, v: &str| CliError::schema(format!("unknown {field} `{v}`"));
        Ok(AssemblyOptions {
            sigma_min: self.sigma_min,
            swap_symmetry: self.swap_symmetry,
            zero_diagonal_multipliers: self.zero_diagonal_multipliers,
            delta_p: match self.delta_p.as_str() {
                "incremental" => DeltaPWeighting::Incremental,
                "identity" => DeltaPWeighting::Identity,
                v => return Err(bad("delta_p", v)),
            },
            s_rows: match self.s_rows.as_str() {
                "with_constant" => SProcedureRows::WithConstant,
                "cell_only" => SProcedureRows::CellOnly,
                v => return Err(bad("s_rows", v)),
            },
            objective: match self.objective.as_str() {
                "sigma_gap" => Objective::SigmaGap,
                "feasibility" => Objective::Feasibility,
                v => return Err(bad("objective", v)),
            },
            facial_reduction: self.facial_reduction,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellData {
    pub i: usize,
    pub j: usize,
    pub pbar: Rows,
    pub u: Rows,
    pub r: Rows,
    pub w: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateData {
    pub n: usize,
    pub eta: f64,
    pub assembly: AssemblyData,
    /// P_i of the diagonal cells.
    pub p: Vec<Rows>,
    /// Off-diagonal cells in (i, j) order.
    pub cells: Vec<CellData>,
    /// L per facet.
    pub couplings: Vec<Rows>,
    pub sigma: [f64; 3],
    pub solver_status: String,
    pub max_residual: f64,
}

impl From<&Certificate> for CertificateData {
    fn from(c: &Certificate) -> Self {
        let cells = c
            .pbar
            .iter()
            .map(|(&(i, j), pb)| {
                let m = &c.multipliers[&(i, j)];
                CellData {
                    i,
                    j,
                    pbar: mat_to_rows(pb),
                    u: mat_to_rows(&m.u),
                    r: mat_to_rows(&m.r),
                    w: mat_to_rows(&m.w),
                }
            })
            .collect();
        CertificateData {
            n: c.n,
            eta: c.eta,
            assembly: (&c.options).into(),
            p: c.p.iter().map(mat_to_rows).collect(),
            cells,
            couplings: c.couplings.iter().map(mat_to_rows).collect(),
            sigma: [c.sigma.0, c.sigma.1, c.sigma.2],
            solver_status: c.solver_status.clone(),
            max_residual: c.max_residual,
        }
    }
}

impl CertificateData {
    pub fn to_certificate(&self) -> Result<Certificate, CliError> {
        let mut pbar = BTreeMap::new();
        let mut multipliers = BTreeMap::new();
        for cell in &self.cells {
            let key = (cell.i, cell.j);
            pbar.insert(key, mat_from_rows(&cell.pbar, "Pbar")?);
            multipliers.insert(
                key,
                Multipliers {
                    u: mat_from_rows(&cell.u, "U")?,
                    r: mat_from_rows(&cell.r, "R")?,
                    w: mat_from_rows(&cell.w, "W")?,
                },
            );
        }
        Ok(Certificate {
            n: self.n,
            eta: self.eta,
            options: self.assembly.to_options()?,
            p: self
                .p
                .iter()
                .map(|m| mat_from_rows(m, "P"))
                .collect::<Result<_, _>>()?,
            pbar,
            multipliers,
            couplings: self
                .couplings
                .iter()
                .map(|m| mat_from_rows(m, "L"))
                .collect::<Result<_, _>>()?,
            sigma: (self.sigma[0], self.sigma[1], self.sigma[2]),
            solver_status: self.solver_status.clone(),
            max_residual: self.max_residual,
        })
    }
}

/// A certificate together with everything needed to re-check it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateArtifact {
    pub schema: String,
    pub system: SystemDescription,
    pub approximation: ApproxData,
    pub certificate: CertificateData,
}
artifact!(CertificateArtifact, CERTIFICATE_SCHEMA);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusData {
    pub p_vars: usize,
    pub pbar_vars: usize,
    pub multiplier_vars: usize,
    pub coupling_vars: usize,
    pub scalar_vars: usize,
    pub free_entries: usize,
    pub lmi_blocks: usize,
    pub equality_rows: usize,
    pub inequality_rows: usize,
    /// Product cells X_ij (all of them, mirrored or not).
    pub cells: usize,
}

impl CensusData {
    pub fn new(c: &Census, regions: usize) -> Self {
        CensusData {
            p_vars: c.p_vars,
            pbar_vars: c.pbar_vars,
            multiplier_vars: c.multiplier_vars,
            coupling_vars: c.coupling_vars,
            scalar_vars: c.scalar_vars,
            free_entries: c.free_entries,
            lmi_blocks: c.lmi_blocks,
            equality_rows: c.equality_rows,
            inequality_rows: c.inequality_rows,
            cells: regions * regions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckItemData {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckData {
    pub passed: bool,
    pub tolerance: f64,
    pub max_residual: f64,
    pub worst: String,
    pub items: Vec<CheckItemData>,
}

impl From<&CheckReport> for CheckData {
    fn from(c: &CheckReport) -> Self {
        CheckData {
            passed: c.passed,
            tolerance: c.tolerance,
            max_residual: c.max_residual,
            worst: c.worst.clone(),
            items: c
                .items
                .iter()
                .map(|i| CheckItemData {
                    name: i.name.clone(),
                    residual: i.residual,
                })
                .collect(),
        }
    }
}

/// Small-gain cross-check of a single-region (sector) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorOracle {
    pub sector: [f64; 2],
    /// ‖C(sI − A + cBC)⁻¹B‖∞ at the sector center c.
    pub channel_gain: f64,
    /// gain × sector radius; below 1 the circle criterion applies.
    pub loop_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportArtifact {
    pub schema: String,
    pub system: String,
    /// `certified`, `not_certified` or `solver_failure`.
    pub outcome: String,
    pub exit_code: i32,
    pub eta_ref: f64,
    pub approximation: ApproxData,
    pub census: CensusData,
    pub sigma: Option<[f64; 3]>,
    pub check: Option<CheckData>,
    pub solver_status: String,
    pub detail: String,
    pub wall_time_s: f64,
    pub sector_oracle: Option<SectorOracle>,
    pub certificate_file: Option<String>,
}
artifact!(ReportArtifact, REPORT_SCHEMA);

impl ReportArtifact {
    pub fn new(name: &str, eta_ref: f64, r: &CertifyReport, exit_code: i32) -> Self {
        ReportArtifact {
            schema: REPORT_SCHEMA.into(),
            system: name.into(),
            outcome: r.outcome.as_str().into(),
            exit_code,
            eta_ref,
            approximation: (&r.approx).into(),
            census: CensusData::new(&r.census, r.regions()),
            sigma: r
                .certificate
                .as_ref()
                .map(|c| [c.sigma.0, c.sigma.1, c.sigma.2]),
            check: r.check.as_ref().map(CheckData::from),
            solver_status: r.solver_status.clone(),
            detail: r.detail.clone(),
            wall_time_s: r.wall_time.as_secs_f64(),
            sector_oracle: None,
            certificate_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleData {
    pub per_cell: usize,
    pub samples: usize,
    pub max_bound_violation: f64,
    pub max_facet_jump: f64,
}

impl SampleData {
    pub fn new(per_cell: usize, s: &SampleReport) -> Self {
        SampleData {
            per_cell,
            samples: s.samples,
            max_bound_violation: s.max_bound_violation,
            max_facet_jump: s.max_facet_jump,
        }
    }
}

/// Result of re-verifying a stored certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckArtifact {
    pub schema: String,
    pub system: String,
    pub passed: bool,
    pub check: CheckData,
    pub sampling: Option<SampleData>,
    pub seed: u64,
}
artifact!(CheckArtifact, CHECK_SCHEMA);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairResult {
    pub x0: Vec<f64>,
    pub x0_tilde: Vec<f64>,
    /// ‖Δx(T)‖ / ‖Δx(0)‖.
    pub ratio: f64,
    pub decrease_passed: Option<bool>,
    pub max_increase: Option<f64>,
    pub max_envelope_excess: Option<f64>,
}

/// Summary of seeded random trajectory pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsArtifact {
    pub schema: String,
    pub system: String,
    pub seed: u64,
    pub horizon: f64,
    pub tolerance: f64,
    pub pairs: Vec<PairResult>,
    pub all_passed: Option<bool>,
    pub max_ratio: f64,
}
artifact!(PairsArtifact, PAIRS_SCHEMA);
