//! Trajectory pairs of the original nonlinear system and the decrease checks on V.

use std::io::Write;

use super::check::evaluate_v;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::lmi::Certificate;
use crate::ode::{integrate, integrate_at, OdeOptions};
use crate::reformulate::{AugmentedSystem, LureSystem, PwaLureSystem};

#[derive(Debug, Clone)]
pub struct TrajectoryPair {
    pub times: Vec<f64>,
    pub x: Vec<Vector>,
    pub x_tilde: Vec<Vector>,
    /// V along the pair, when a certificate was supplied.
    pub v: Option<Vec<f64>>,
    pub delta_norm: Vec<f64>,
}

impl TrajectoryPair {
    /// ‖Δx(T)‖ / ‖Δx(0)‖, or 0 when the pair starts together.
    pub fn contraction_ratio(&self) -> f64 {
        let first = self.delta_norm[0];
        let last = *self.delta_norm.last().expect("non-empty");
        if first == 0.0 {
            0.0
        } else {
            last / first
        }
    }

    /// Comma-separated rows `t, x…, x̃…, |dx|, V` with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.x[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|k| format!("x{k}")));
        header.extend((1..=n).map(|k| format!("xt{k}")));
        header.push("dx_norm".into());
        header.push("V".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![format!("{:e}", self.times[k])];
            row.extend(self.x[k].iter().map(|v| format!("{v:e}")));
            row.extend(self.x_tilde[k].iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", self.delta_norm[k]));
            row.push(
                self.v
                    .as_ref()
                    .map_or(String::new(), |v| format!("{:e}", v[k])),
            );
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates ẋ = Ax − Bφ(Cx) from x0 and x̃0 together, so both share one step grid.
pub fn simulate_pair(
    sys: &LureSystem,
    x0: &Vector,
    x0_tilde: &Vector,
    t_end: f64,
    opts: &OdeOptions,
    cert: Option<(&Certificate, &AugmentedSystem)>,
) -> Result<TrajectoryPair> {
    let n = sys.n();
    if x0.len() != n || x0_tilde.len() != n {
        return Err(Error::Dimension(format!(
            "initial states must have length {n}"
        )));
    }
    if !(t_end > 0.0) {
        return Err(Error::Argument(format!(
            "horizon must be positive, got {t_end}"
        )));
    }
    let mut y0 = Vector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from(x0);
    y0.rows_mut(n, n).copy_from(x0_tilde);
    let field = |_: f64, y: &Vector| {
        let mut out = Vector::zeros(2 * n);
        out.rows_mut(0, n)
            .copy_from(&sys.vector_field(&y.rows(0, n).into_owned()));
        out.rows_mut(n, n)
            .copy_from(&sys.vector_field(&y.rows(n, n).into_owned()));
        out
    };
    let sol = integrate(field, 0.0, &y0, t_end, opts)?;
    let x: Vec<Vector> = sol.y.iter().map(|y| y.rows(0, n).into_owned()).collect();
    let x_tilde: Vec<Vector> = sol.y.iter().map(|y| y.rows(n, n).into_owned()).collect();
    let delta_norm = x
        .iter()
        .zip(&x_tilde)
        .map(|(a, b)| (a - b).norm())
        .collect();
    let v = match cert {
        Some((cert, aug)) => Some(
            x.iter()
                .zip(&x_tilde)
                .map(|(a, b)| evaluate_v(cert, aug, a, b))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(TrajectoryPair {
        times: sol.t,
        x,
        x_tilde,
        v,
        delta_norm,
    })
}

/// Largest distance between trajectories of the original system and of its
/// PWA reformulation, sampled at `samples` equally spaced times on (0, T].
pub fn cross_validate_pwa(
    sys: &LureSystem,
    pwa: &PwaLureSystem,
    x0: &Vector,
    t_end: f64,
    samples: usize,
    opts: &OdeOptions,
) -> Result<f64> {
    let times: Vec<f64> = (1..=samples.max(1))
        .map(|k| t_end * k as f64 / samples.max(1) as f64)
        .collect();
    let a = integrate_at(|_, x| sys.vector_field(x), 0.0, x0, &times, opts)?;
    let b = integrate_at(|_, x| pwa.vector_field(x, &sys.nl), 0.0, x0, &times, opts)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseReport {
    pub passed: bool,
    /// max over steps of (V(t_{k+1}) − V(t_k)) / V(0).
    pub max_increase: f64,
    /// max over t of V(t) / (V(0)·exp(−σ₃t/σ₂)) − 1.
    pub max_envelope_excess: f64,
    /// First time at which either check fails.
    pub offending_time: Option<f64>,
}

/// V must not increase by more than tol·V(0) between steps and must stay
/// under V(0)·exp(−(σ₃/σ₂)t)·(1 + tol).
pub fn check_decrease(
    cert: &Certificate,
    pair: &TrajectoryPair,
    tol: f64,
) -> Result<DecreaseReport> {
    let v = pair
        .v
        .as_ref()
        .ok_or_else(|| Error::Argument("trajectory pair carries no V series".into()))?;
    let v0 = v[0];
    let mut report = DecreaseReport {
        passed: true,
        max_increase: 0.0,
        max_envelope_excess: 0.0,
        offending_time: None,
    };
    if v0 == 0.0 {
        report.passed = v.iter().all(|x| x.abs() == 0.0);
        return Ok(report);
    }
    let rate = envelope_rate(cert);
    for k in 0..v.len() {
        if k > 0 {
            let inc = (v[k] - v[k - 1]) / v0;
            report.max_increase = report.max_increase.max(inc);
            if inc > tol && report.offending_time.is_none() {
                report.offending_time = Some(pair.times[k]);
            }
        }
        let env = v0 * (-rate * pair.times[k]).exp();
        let excess = if env > 0.0 {
            v[k] / env - 1.0
        } else if v[k] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        report.max_envelope_excess = report.max_envelope_excess.max(excess);
        if excess > tol && report.offending_time.is_none() {
            report.offending_time = Some(pair.times[k]);
        }
    }
    report.passed = report.offending_time.is_none();
    Ok(report)
}

/// σ₃/σ₂, the exponential decay rate V̇ ≤ −σ₃‖Δx‖² ≤ −(σ₃/σ₂)V guarantees.
pub fn envelope_rate(cert: &Certificate) -> f64 {
    cert.sigma.2 / cert.sigma.1
}
