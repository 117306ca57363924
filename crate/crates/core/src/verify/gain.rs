//! Peak gain of the linear channel p ↦ q around a center slope.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{is_hurwitz, Mat};
use crate::reformulate::LureSystem;

const GRID_POINTS: usize = 4000;
const REFINE_ITERS: usize = 200;

/// |C(jωI − A_c)⁻¹B| with A_c = A − center·BC.
fn magnitude(ac: &Mat, b: &Mat, c: &Mat, omega: f64) -> f64 {
    let n = ac.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let re = -ac[(i, j)];
        let im = if i == j { omega } else { 0.0 };
        Complex::new(re, im)
    });
    let rhs = DVector::from_fn(n, |i, _| Complex::new(b[(i, 0)], 0.0));
    let Some(x) = m.lu().solve(&rhs) else {
        return f64::INFINITY;
    };
    let g: Complex<f64> = (0..n).map(|i| x[i] * c[(0, i)]).sum();
    g.norm()
}

/// sup over ω ≥ 0 of |C(jωI − A + center·BC)⁻¹B|: a logarithmic grid followed
/// by golden-section refinement around the best grid point.
pub fn hinf_channel_gain(sys: &LureSystem, center_slope: f64) -> Result<f64> {
    let ac = &sys.a - &sys.b * &sys.c * center_slope;
    if !is_hurwitz(&ac) {
        return Err(Error::NotHurwitz(format!(
            "A - {center_slope}·BC has an eigenvalue with nonnegative real part"
        )));
    }
    let radius = ac
        .complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |a, z| a.max(z.norm()));
    let lo = (radius * 1e-6).max(1e-8).ln();
    let hi = ((radius + 1.0) * 1e4).ln();
    let at = |log_w: f64| magnitude(&ac, &sys.b, &sys.c, log_w.exp());
    let mut best = magnitude(&ac, &sys.b, &sys.c, 0.0);
    let mut best_k = None;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    for k in 0..GRID_POINTS {
        let v = at(lo + step * k as f64);
        if v > best {
            best = v;
            best_k = Some(k);
        }
    }
    if let Some(k) = best_k {
        let (mut a, mut b) = (lo + step * (k as f64 - 1.0), lo + step * (k as f64 + 1.0));
        let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (at(c), at(d));
        for _ in 0..REFINE_ITERS {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = at(d);
            }
        }
        best = best.max(fc).max(fd);
    }
    Ok(best)
}
