//! Adaptive Dormand–Prince 5(4) integration with FSAL and PI-free step control.

use crate::error::{Error, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub first_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            first_step: None,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OdeSolution {
    /// Accepted step times, starting with t0.
    pub t: Vec<f64>,
    pub y: Vec<Vector>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights equal the last row of A; these are b5 − b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates y′ = f(t, y) from t0 to t_end, recording every accepted step.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &Vector,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &Vector) -> Vector,
{
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Argument(format!(
            "need t0 < t_end, got [{t0}, {t_end}]"
        )));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Argument("tolerances must be positive".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            time: t0,
            reason: "non-finite initial state".into(),
        });
    }
    let mut sol = OdeSolution {
        t: vec![t0],
        y: vec![y0.clone()],
    };
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);
    let mut h = opts
        .first_step
        .unwrap_or_else(|| initial_step(&mut f, t, &y, &k1, opts))
        .min(t_end - t0);
    let mut steps = 0;
    let mut k: Vec<Vector> = vec![Vector::zeros(y.len()); 7];
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                time: t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Integration {
                time: t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        k[0] = k1.clone();
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    ys.axpy(h * A[s][j], kj, 1.0);
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y_new = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                y_new.axpy(h * A[6][j], kj, 1.0);
            }
        }
        let mut err = Vector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err.axpy(h * E[j], kj, 1.0);
            }
        }
        let mut acc = 0.0;
        for i in 0..y.len() {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        let norm = (acc / y.len().max(1) as f64).sqrt();
        if !norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.2;
            continue;
        }
        if norm <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            // FSAL: the seventh stage is f at the accepted point
            k1 = k[6].clone();
            sol.t.push(t);
            sol.y.push(y.clone());
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(sol)
}

/// Integrates through the given increasing output times and returns the state at each.
pub fn integrate_at<F>(
    mut f: F,
    t0: f64,
    y0: &Vector,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Vector>>
where
    F: FnMut(f64, &Vector) -> Vector,
{
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    let mut y = y0.clone();
    for &target in times {
        if target < t {
            return Err(Error::Argument("output times must be increasing".into()));
        }
        if target > t {
            let seg = integrate(&mut f, t, &y, target, opts)?;
            y = seg.y.last().expect("non-empty").clone();
            t = target;
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step<F>(f: &mut F, t: f64, y: &Vector, f0: &Vector, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &Vector) -> Vector,
{
    let scale = |v: &Vector| {
        let s: f64 = v
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a / (opts.atol + opts.rtol * b.abs())).powi(2))
            .sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = y + f0 * h0;
    let f1 = f(t + h0, &y1);
    let d2 = scale(&(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
