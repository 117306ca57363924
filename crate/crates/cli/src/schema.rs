//! System description files.
//!
//! ```json
//! {
//!   "schema": "lurepwa/system/1",
//!   "name": "example",
//!   "A": [[-1, 0], [3, -2]],
//!   "B": [[1], [0]],
//!   "C": [[0, 1]],
//!   "nonlinearity": { "catalog_id": "poly_sat", "parameters": [1, 3, 2] },
//!   "eta_ref": 0.8
//! }
//! ```
//!
//! `solver` and `validation` sections are optional and default as below.

use lurepwa::linalg::Mat;
use lurepwa::{CertifyOptions, LureSystem, Nonlinearity, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SYSTEM_SCHEMA: &str = "lurepwa/system/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescription {
    pub schema: String,
    pub name: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub nonlinearity: NonlinearitySpec,
    pub eta_ref: f64,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub validation: ValidationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NonlinearitySpec {
    Catalog(CatalogEntry),
    Tabulated(TabulatedEntry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub catalog_id: String,
    pub parameters: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedEntry {
    /// Rows (q, φ(q), φ′(q)).
    pub tabulated: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub backend: String,
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Odd region count overriding the one derived from eta_ref.
    pub force_regions: Option<usize>,
    pub tighten_decay: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverOptions::default();
        SolverSection {
            backend: s.backend_name,
            tolerance: s.feasibility_tolerance,
            max_iterations: s.max_iterations,
            force_regions: None,
            tighten_decay: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    pub seed: u64,
    /// Random trajectory pairs for `simulate --pairs` without a count.
    pub pairs: usize,
    pub samples_per_cell: usize,
    /// Initial states are drawn from [-scale, scale]ⁿ.
    pub region_scale: f64,
    pub horizon: f64,
    pub decrease_tol: f64,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            seed: 0,
            pairs: 100,
            samples_per_cell: 1000,
            region_scale: 3.0,
            horizon: 20.0,
            decrease_tol: 1e-4,
        }
    }
}

pub fn mat_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Mat, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(CliError::schema(format!("matrix {what} is empty")));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(CliError::schema(format!("matrix {what} has ragged rows")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl SystemDescription {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let desc: SystemDescription = serde_json::from_str(text)
            .map_err(|e| CliError::schema(format!("system description: {e}")))?;
        if desc.schema != SYSTEM_SCHEMA {
            return Err(CliError::schema(format!(
                "unsupported schema `{}` (expected `{SYSTEM_SCHEMA}`)",
                desc.schema
            )));
        }
        Ok(desc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptions serialize")
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, CliError> {
        let nl = match &self.nonlinearity {
            NonlinearitySpec::Catalog(CatalogEntry {
                catalog_id,
                parameters,
            }) => Nonlinearity::from_catalog(catalog_id, parameters),
            NonlinearitySpec::Tabulated(TabulatedEntry { tabulated }) => Nonlinearity::tabulated(
                tabulated.iter().map(|r| r[0]).collect(),
                tabulated.iter().map(|r| r[1]).collect(),
                tabulated.iter().map(|r| r[2]).collect(),
            ),
        };
        nl.map_err(CliError::from)
    }

    pub fn system(&self) -> Result<LureSystem, CliError> {
        let a = mat_from_rows(&self.a, "A")?;
        let b = mat_from_rows(&self.b, "B")?;
        let c = mat_from_rows(&self.c, "C")?;
        LureSystem::new(a, b, c, self.nonlinearity()?).map_err(CliError::from)
    }

    pub fn certify_options(&self) -> CertifyOptions {
        let mut opts = CertifyOptions::new(self.eta_ref);
        opts.force_regions = self.solver.force_regions;
        opts.tighten_decay = self.solver.tighten_decay;
        opts.solver = SolverOptions {
            feasibility_tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            backend_name: self.solver.backend.clone(),
            ..SolverOptions::default()
        };
        opts
    }

    /// File-name stem for artifacts.
    pub fn stem(&self) -> String {
        let s: String = self
            .name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        if s.is_empty() {
            "system".into()
        } else {
            s
        }
    }
}
