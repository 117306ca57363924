//! Independent evaluation of a certificate against the Lyapunov conditions.
//!
//! Blocks are rebuilt here from the certificate matrices and the augmented
//! system alone, in their full form (the dissipation block keeps both p and p̃),
//! so this check shares no code path with the assembly.

use crate::error::{Error, Result};
use crate::linalg::{max_abs, put, quad_form, sym_eig_extremes, Mat, Vector};
use crate::lmi::{lift_diagonal, s_procedure_rows, Certificate, DeltaPWeighting};
use crate::reformulate::AugmentedSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    /// Normalized violation; ≤ 0 means satisfied.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub passed: bool,
    pub tolerance: f64,
    pub max_residual: f64,
    /// Name of the item attaining `max_residual`.
    pub worst: String,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn failing(&self) -> impl Iterator<Item = &CheckItem> {
        self.items
            .iter()
            .filter(move |i| i.residual > self.tolerance)
    }
}

/// V(x, x̃) with the formula of the cell containing (x, x̃).
pub fn evaluate_v(
    cert: &Certificate,
    aug: &AugmentedSystem,
    x: &Vector,
    x_tilde: &Vector,
) -> Result<f64> {
    let (i, j) = aug.locate(x, x_tilde)?;
    Ok(evaluate_v_in(cert, aug, i, j, x, x_tilde))
}

/// V(x, x̃) using the quadratic form of cell (i, j), wherever the point lies.
pub fn evaluate_v_in(
    cert: &Certificate,
    aug: &AugmentedSystem,
    i: usize,
    j: usize,
    x: &Vector,
    x_tilde: &Vector,
) -> f64 {
    if i == j {
        let d = x - x_tilde;
        quad_form(&cert.p[i], &d)
    } else {
        quad_form(&cert.pbar(i, j), &aug.lift(x, x_tilde))
    }
}

fn psd_violation(m: &Mat) -> f64 {
    -sym_eig_extremes(m).0 / max_abs(m).max(1.0)
}

fn nsd_violation(m: &Mat) -> f64 {
    sym_eig_extremes(m).1 / max_abs(m).max(1.0)
}

/// [[X, Y], [Yᵀ, Z]].
fn block2(x: &Mat, y: &Mat, z: &Mat) -> Mat {
    let (a, b) = (x.nrows(), z.nrows());
    let mut m = Mat::zeros(a + b, a + b);
    put(&mut m, 0, 0, x);
    put(&mut m, 0, a, y);
    put(&mut m, a, 0, &y.transpose());
    put(&mut m, a, a, z);
    m
}

/// Eigenvalue and equality residuals of every condition at the certificate.
pub fn check_certificate(cert: &Certificate, aug: &AugmentedSystem, tol: f64) -> CheckReport {
    let mut items = Vec::new();
    let mut add = |name: String, residual: f64| {
        let residual = if residual.is_nan() {
            f64::INFINITY
        } else {
            residual
        };
        items.push(CheckItem { name, residual });
    };
    match structure_errors(cert, aug) {
        Ok(()) => {}
        Err(e) => {
            add(format!("structure: {e}"), f64::INFINITY);
            return finish(items, tol);
        }
    }
    let n = aug.n;
    let big = aug.regions;
    let (s1, s2, s3) = cert.sigma;
    add(
        "sigma1>0".into(),
        if s1 > 0.0 { 0.0 } else { f64::INFINITY },
    );
    add(
        "sigma3>0".into(),
        if s3 > 0.0 { 0.0 } else { f64::INFINITY },
    );
    add("sigma2>=sigma1".into(), (s1 - s2) / s2.abs().max(1.0));

    let eye_n = Mat::identity(n, n);
    for i in 0..big {
        let p = &cert.p[i];
        add(format!("symmetric[{i}]"), max_abs(&(p - p.transpose())));
        add(format!("lower[{i}]"), psd_violation(&(p - &eye_n * s1)));
        add(format!("upper[{i}]"), psd_violation(&(&eye_n * s2 - p)));
    }
    for blk in decrease_blocks(cert, aug) {
        add(blk.name, nsd_violation(&(blk.base + blk.weight * s3)));
    }

    let jbar = lift_diagonal(&eye_n);
    for i in 0..big {
        for j in 0..big {
            if i == j {
                continue;
            }
            let pb = cert.pbar(i, j);
            let mult = &cert.multipliers[&(i, j)];
            let g = s_procedure_rows(aug, i, j, cert.options.s_rows);
            let gt = g.transpose();
            add(
                format!("symmetric[{i},{j}]"),
                max_abs(&(&pb - pb.transpose())),
            );
            for (tag, u) in [("U", &mult.u), ("R", &mult.r), ("W", &mult.w)] {
                let neg = u.iter().fold(0.0_f64, |a, v| a.max(-v));
                add(format!("{tag}>=0[{i},{j}]"), neg / max_abs(u).max(1.0));
                if cert.options.zero_diagonal_multipliers {
                    let diag = u.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                    add(format!("{tag}-diag[{i},{j}]"), diag);
                }
                add(
                    format!("{tag}-symmetric[{i},{j}]"),
                    max_abs(&(u - u.transpose())),
                );
            }
            add(
                format!("lower[{i},{j}]"),
                psd_violation(&(&pb - &jbar * s1 - &gt * &mult.u * &g)),
            );
            add(
                format!("upper[{i},{j}]"),
                psd_violation(&(&jbar * s2 - &pb - &gt * &mult.r * &g)),
            );
        }
    }

    for (k, f) in aug.facets.iter().enumerate() {
        let l = &cert.couplings[k];
        let lhs = cert.pbar(f.from.0, f.from.1);
        let rhs = cert.pbar(f.to.0, f.to.1) + l * &f.e + f.e.transpose() * l.transpose();
        let scale = max_abs(&lhs).max(max_abs(&rhs)).max(1.0);
        add(
            format!(
                "continuity[{},{}|{},{}]",
                f.from.0, f.from.1, f.to.0, f.to.1
            ),
            max_abs(&(lhs - rhs)) / scale,
        );
    }
    finish(items, tol)
}

/// A dissipation block split as `base + σ₃·weight`; `weight` is PSD.
pub struct DecreaseBlock {
    pub name: String,
    pub base: Mat,
    pub weight: Mat,
}

/// Every dissipation block of the certificate in full form (both p and p̃).
pub fn decrease_blocks(cert: &Certificate, aug: &AugmentedSystem) -> Vec<DecreaseBlock> {
    let n = aug.n;
    let big = aug.regions;
    let with_p = cert.eta > 0.0;
    let inv_eta2 = if with_p {
        1.0 / (cert.eta * cert.eta)
    } else {
        0.0
    };
    let (b, c, d) = (&aug.pwa.b, &aug.pwa.c, aug.pwa.d);
    let pad = |m: Mat, extra: usize| {
        let mut out = Mat::zeros(m.nrows() + extra, m.ncols() + extra);
        put(&mut out, 0, 0, &m);
        out
    };
    let mut out = Vec::new();
    for i in 0..big {
        let p = &cert.p[i];
        let a = &aug.pwa.cells[i].a;
        let core = a.transpose() * p + p * a + c.transpose() * c;
        let (base, extra) = if with_p {
            let m = block2(
                &core,
                &(p * b + c.transpose() * d),
                &Mat::from_element(1, 1, d * d - inv_eta2),
            );
            (m, 1)
        } else {
            (core, 0)
        };
        out.push(DecreaseBlock {
            name: format!("decrease[{i}]"),
            base,
            weight: pad(Mat::identity(n, n), extra),
        });
    }
    let jbar = lift_diagonal(&Mat::identity(n, n));
    let ip = match cert.options.delta_p {
        DeltaPWeighting::Incremental => Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]),
        DeltaPWeighting::Identity => Mat::identity(2, 2),
    };
    for i in 0..big {
        for j in 0..big {
            if i == j {
                continue;
            }
            let pb = cert.pbar(i, j);
            let g = s_procedure_rows(aug, i, j, cert.options.s_rows);
            let w = &cert.multipliers[&(i, j)].w;
            let abar = &aug.cell(i, j).a;
            let core = abar.transpose() * &pb
                + &pb * abar
                + aug.c.transpose() * &aug.c
                + g.transpose() * w * &g;
            let (base, extra) = if with_p {
                let m = block2(
                    &core,
                    &(&pb * &aug.b + aug.c.transpose() * &aug.d),
                    &(aug.d.transpose() * &aug.d - &ip * inv_eta2),
                );
                (m, 2)
            } else {
                (core, 0)
            };
            out.push(DecreaseBlock {
                name: format!("decrease[{i},{j}]"),
                base,
                weight: pad(jbar.clone(), extra),
            });
        }
    }
    out
}

/// Largest σ₃ keeping every dissipation block of `cert` negative semidefinite,
/// with all other certificate entries held fixed; found by bisection.
pub fn max_decay_margin(cert: &Certificate, aug: &AugmentedSystem) -> f64 {
    let blocks = decrease_blocks(cert, aug);
    // exact null directions of the blocks come out at rounding level
    let ok = |s: f64| {
        blocks.iter().all(|b| {
            let m = &b.base + &b.weight * s;
            sym_eig_extremes(&m).1 <= 1e-10 * max_abs(&m).max(1.0)
        })
    };
    let mut lo = 0.0;
    if !ok(lo) {
        return 0.0;
    }
    let mut hi = cert.sigma.1.max(1.0);
    while ok(hi) && hi < 1e12 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn structure_errors(cert: &Certificate, aug: &AugmentedSystem) -> Result<()> {
    let big = aug.regions;
    let dim = aug.dim();
    let bad = |msg: String| Err(Error::Dimension(msg));
    if cert.p.len() != big || cert.p.iter().any(|p| p.shape() != (aug.n, aug.n)) {
        return bad(format!("expected {big} matrices P_i of size {}", aug.n));
    }
    for i in 0..big {
        for j in 0..big {
            if i == j {
                continue;
            }
            match (cert.pbar.get(&(i, j)), cert.multipliers.get(&(i, j))) {
                (Some(p), Some(m)) if p.shape() == (dim, dim) => {
                    let rows = s_procedure_rows(aug, i, j, cert.options.s_rows).nrows();
                    if [&m.u, &m.r, &m.w].iter().any(|u| u.shape() != (rows, rows)) {
                        return bad(format!("multiplier size at ({i}, {j})"));
                    }
                }
                _ => return bad(format!("missing or malformed cell ({i}, {j})")),
            }
        }
    }
    if cert.couplings.len() != aug.facets.len()
        || cert.couplings.iter().any(|l| l.shape() != (dim, 1))
    {
        return bad("coupling matrices do not match the facets".into());
    }
    Ok(())
}

fn finish(items: Vec<CheckItem>, tol: f64) -> CheckReport {
    let (worst, max_residual) =
        items
            .iter()
            .fold((String::new(), f64::NEG_INFINITY), |(n, m), it| {
                if it.residual > m {
                    (it.name.clone(), it.residual)
                } else {
                    (n, m)
                }
            });
    CheckReport {
        passed: max_residual <= tol,
        tolerance: tol,
        max_residual,
        worst,
        items,
    }
}
