//! Certificates: the matrix values of a feasible point.

use std::collections::BTreeMap;

use super::assemble::{lift_diagonal, AssemblyOptions, FacetSource};
use super::problem::LmiProblem;
use crate::error::{Error, Result};
use crate::linalg::{swap_permutation, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub u: Mat,
    pub r: Mat,
    pub w: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub n: usize,
    pub eta: f64,
    pub options: AssemblyOptions,
    /// Pᵢ of the diagonal cells.
    pub p: Vec<Mat>,
    /// P̄_ij for every off-diagonal cell.
    pub pbar: BTreeMap<(usize, usize), Mat>,
    pub multipliers: BTreeMap<(usize, usize), Multipliers>,
    /// L per facet, in the order of `AugmentedSystem::facets`.
    pub couplings: Vec<Mat>,
    /// (σ₁, σ₂, σ₃).
    pub sigma: (f64, f64, f64),
    pub solver_status: String,
    /// Largest normalized violation of the solved problem at this point.
    pub max_residual: f64,
}

impl Certificate {
    pub fn regions(&self) -> usize {
        self.p.len()
    }

    /// Quadratic form of V on cell (i, j) in x̄-coordinates.
    pub fn pbar(&self, i: usize, j: usize) -> Mat {
        if i == j {
            lift_diagonal(&self.p[i])
        } else {
            self.pbar[&(i, j)].clone()
        }
    }
}

/// Reads the certificate out of a solution vector of an assembled problem.
pub fn extract_certificate(problem: &LmiProblem, x: &[f64], status: &str) -> Result<Certificate> {
    let index = &problem.index;
    let options = index.options.ok_or_else(|| {
        Error::Assembly("problem carries no cell index (parsed from text?)".into())
    })?;
    if x.len() != problem.num_entries() {
        return Err(Error::Dimension(format!(
            "solution of length {} for {} entries",
            x.len(),
            problem.num_entries()
        )));
    }
    let n = index.n;
    let swap = swap_permutation(n);
    let p = index.p.iter().map(|v| problem.value(*v, x)).collect();
    let mut pbar = BTreeMap::new();
    let mut multipliers = BTreeMap::new();
    for (&(i, j), cell) in &index.cells {
        let q = problem.value(cell.pbar, x);
        let pb = match &index.pbar_basis {
            Some(t) => t * q * t.transpose(),
            None => q,
        };
        let m = Multipliers {
            u: problem.value(cell.u, x),
            r: problem.value(cell.r, x),
            w: problem.value(cell.w, x),
        };
        if options.swap_symmetry {
            let perm = mirror_rows(index.cell_rows[i], index.cell_rows[j], m.u.nrows());
            let permute =
                |a: &Mat| Mat::from_fn(a.nrows(), a.ncols(), |r, c| a[(perm[r], perm[c])]);
            pbar.insert((j, i), &swap * &pb * &swap);
            multipliers.insert(
                (j, i),
                Multipliers {
                    u: permute(&m.u),
                    r: permute(&m.r),
                    w: permute(&m.w),
                },
            );
        }
        pbar.insert((i, j), pb);
        multipliers.insert((i, j), m);
    }
    let mut couplings = Vec::with_capacity(index.facets.len());
    for source in &index.facets {
        couplings.push(match *source {
            FacetSource::Own(v) => problem.value(v, x),
            FacetSource::Mirror(k) => match index.facets[k] {
                FacetSource::Own(v) => &swap * problem.value(v, x),
                FacetSource::Mirror(_) => {
                    return Err(Error::Assembly("mirror of a mirrored facet".into()))
                }
            },
        });
    }
    let s = |k: usize| x[problem.var(index.sigma[k]).offset];
    Ok(Certificate {
        n,
        eta: index.eta,
        options,
        p,
        pbar,
        multipliers,
        couplings,
        sigma: (s(0), s(1), s(2)),
        solver_status: status.to_string(),
        max_residual: problem.residuals(x).max(),
    })
}

/// Row permutation taking the S-procedure rows of cell (i, j) to those of (j, i):
/// [Gⱼ-rows, Gᵢ-rows, trailing rows] read from [Gᵢ-rows, Gⱼ-rows, trailing rows].
fn mirror_rows(ri: usize, rj: usize, total: usize) -> Vec<usize> {
    (0..total)
        .map(|a| {
            if a < rj {
                ri + a
            } else if a < ri + rj {
                a - rj
            } else {
                a
            }
        })
        .collect()
}
