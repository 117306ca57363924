//! Interior-point backend on the Clarabel conic solver.
//!
//! Constraint rows are stacked as equalities (zero cone), linear inequalities
//! (nonnegative cone), then one PSD-triangle cone per LMI block. Clarabel's
//! triangle vectorization is the upper triangle in column-major order with
//! off-diagonal entries scaled by √2.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{Backend, BackendResult, BackendStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::lmi::{LmiProblem, RowKind, Sense};

#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    fn push(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(v);
        }
    }
}

fn row_scale(max_coef: f64, enabled: bool) -> f64 {
    if enabled && max_coef > 0.0 {
        1.0 / max_coef
    } else {
        1.0
    }
}

impl Backend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, problem: &LmiProblem, opts: &SolverOptions) -> Result<BackendResult> {
        let n = problem.num_entries();
        let mut t = Triplets {
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            b: Vec::new(),
        };
        let mut cones = Vec::new();

        // s = b − Ax ∈ K encodes aᵀx + c ∈ K as A = −a, b = c
        for kind in [RowKind::Eq, RowKind::Geq] {
            let rows: Vec<_> = problem.rows.iter().filter(|r| r.kind == kind).collect();
            if rows.is_empty() {
                continue;
            }
            for row in &rows {
                let f = row_scale(row.max_coefficient(), opts.scaling);
                let r = t.b.len();
                let mut c0 = 0.0;
                for &(slot, v) in &row.terms {
                    match slot {
                        Some(k) => t.push(r, k, -f * v),
                        None => c0 += f * v,
                    }
                }
                t.b.push(c0);
            }
            cones.push(match kind {
                RowKind::Eq => SupportedConeT::ZeroConeT(rows.len()),
                RowKind::Geq => SupportedConeT::NonnegativeConeT(rows.len()),
            });
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        for block in &problem.blocks {
            let sign = match block.sense {
                Sense::Psd => 1.0,
                Sense::Nsd => -1.0,
            };
            let f = sign * row_scale(block.max_coefficient(), opts.scaling);
            let base = t.b.len();
            let len = block.dim * (block.dim + 1) / 2;
            t.b.resize(base + len, 0.0);
            for &(r, c, slot, v) in &block.entries {
                let w = if r == c { f * v } else { f * v * sqrt2 };
                let row = base + c * (c + 1) / 2 + r;
                match slot {
                    Some(k) => t.push(row, k, -w),
                    None => t.b[row] += w,
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(block.dim));
        }

        let m = t.b.len();
        let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(k, c) in &problem.objective {
            q[k] += c;
        }
        let tol = opts.feasibility_tolerance;
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(opts.max_iterations)
            .tol_feas(tol)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .build()
            .map_err(|e| Error::Backend(format!("invalid settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &t.b, &cones, settings)
            .map_err(|e| Error::Backend(format!("problem rejected: {e}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => BackendStatus::Feasible,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                BackendStatus::Infeasible
            }
            _ => BackendStatus::Failure,
        };
        Ok(BackendResult {
            status,
            x: sol.x.clone(),
            raw_status: format!("{:?}", sol.status),
            log: format!(
                "iterations={} r_prim={:e} r_dual={:e} obj={:e} time={:.3}s rows={m} cols={n}",
                sol.iterations, sol.r_prim, sol.r_dual, sol.obj_val, sol.solve_time
            ),
        })
    }
}
