//! Tabulated nonlinearities.
//!
//! φ′ is interpolated with a monotone piecewise-cubic Hermite (Fritsch–Carlson)
//! interpolant whose end slopes are zero, so φ′ is C¹ and stays constant
//! beyond the table. φ is the exact integral of that interpolant anchored at
//! φ(0) = 0; the tabulated φ values are only used to validate consistency.

use crate::error::{Error, Result};

/// Relative tolerance between tabulated φ values and ∫₀^q φ′.
pub const TABLE_CONSISTENCY_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    q: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    tangents: Vec<f64>,
    // ∫ from q[0] to q[k] of the interpolated derivative
    cumulative: Vec<f64>,
    offset: f64,
}

impl Table {
    pub fn new(q: Vec<f64>, phi: Vec<f64>, dphi: Vec<f64>) -> Result<Self> {
        let n = q.len();
        if n < 2 || phi.len() != n || dphi.len() != n {
            return Err(Error::MalformedNonlinearity(
                "table needs at least two rows of equal-length (q, phi, dphi)".into(),
            ));
        }
        if q.iter().chain(&phi).chain(&dphi).any(|v| !v.is_finite()) {
            return Err(Error::MalformedNonlinearity(
                "non-finite table entry".into(),
            ));
        }
        if q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MalformedNonlinearity(
                "table abscissae must be strictly increasing".into(),
            ));
        }
        if q[0] > 0.0 || q[n - 1] < 0.0 {
            return Err(Error::MalformedNonlinearity(
                "table must cover q = 0".into(),
            ));
        }
        let tangents = fritsch_carlson(&q, &dphi);
        let mut cumulative = vec![0.0; n];
        for k in 0..n - 1 {
            let h = q[k + 1] - q[k];
            cumulative[k + 1] = cumulative[k]
                + segment_integral(h, dphi[k], dphi[k + 1], tangents[k], tangents[k + 1], 1.0);
        }
        let mut table = Table {
            q,
            phi,
            dphi,
            tangents,
            cumulative,
            offset: 0.0,
        };
        table.offset = table.primitive(0.0);
        let scale = table.phi.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        for k in 0..n {
            let rebuilt = table.eval(table.q[k]);
            if (rebuilt - table.phi[k]).abs() > TABLE_CONSISTENCY_TOL * scale {
                return Err(Error::MalformedNonlinearity(format!(
                    "tabulated phi({}) = {} disagrees with the integral of phi' ({rebuilt})",
                    table.q[k], table.phi[k]
                )));
            }
        }
        Ok(table)
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.q.len()).map(move |k| (self.q[k], self.phi[k], self.dphi[k]))
    }

    pub fn end_slopes(&self) -> (f64, f64) {
        (self.dphi[0], self.dphi[self.dphi.len() - 1])
    }

    /// Half-width of the smallest symmetric interval containing the table.
    pub fn extent(&self) -> f64 {
        self.q[0]
            .abs()
            .max(self.q[self.q.len() - 1].abs())
            .max(f64::MIN_POSITIVE)
    }

    fn locate(&self, x: f64) -> usize {
        match self
            .q
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite"))
        {
            Ok(k) => k.min(self.q.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.q.len() - 2),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let n = self.q.len();
        if x <= self.q[0] {
            return self.dphi[0];
        }
        if x >= self.q[n - 1] {
            return self.dphi[n - 1];
        }
        let k = self.locate(x);
        let h = self.q[k + 1] - self.q[k];
        let s = (x - self.q[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.dphi[k]
            + (s3 - 2.0 * s2 + s) * h * self.tangents[k]
            + (-2.0 * s3 + 3.0 * s2) * self.dphi[k + 1]
            + (s3 - s2) * h * self.tangents[k + 1]
    }

    fn primitive(&self, x: f64) -> f64 {
        let n = self.q.len();
        if x <= self.q[0] {
            return (x - self.q[0]) * self.dphi[0];
        }
        if x >= self.q[n - 1] {
            return self.cumulative[n - 1] + (x - self.q[n - 1]) * self.dphi[n - 1];
        }
        let k = self.locate(x);
        let h = self.q[k + 1] - self.q[k];
        let s = (x - self.q[k]) / h;
        self.cumulative[k]
            + segment_integral(
                h,
                self.dphi[k],
                self.dphi[k + 1],
                self.tangents[k],
                self.tangents[k + 1],
                s,
            )
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.primitive(x) - self.offset
    }
}

/// ∫₀^{s·h} of the cubic Hermite segment with end values (y0, y1) and tangents (m0, m1).
fn segment_integral(h: f64, y0: f64, y1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let i00 = s4 / 2.0 - s3 + s;
    let i10 = s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0;
    let i01 = -s4 / 2.0 + s3;
    let i11 = s4 / 4.0 - s3 / 3.0;
    h * (i00 * y0 + i10 * h * m0 + i01 * y1 + i11 * h * m1)
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    // end tangents stay zero so φ′ joins its constant extension with C¹ continuity
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_table(count: usize) -> Table {
        // samples of the cubic saturation on [-2, 2]
        let q: Vec<f64> = (0..count)
            .map(|k| -2.0 + 4.0 * k as f64 / (count - 1) as f64)
            .collect();
        let phi = q
            .iter()
            .map(|&x: &f64| {
                if x.abs() <= 1.0 {
                    2.0 * x.powi(3)
                } else {
                    6.0 * x - 4.0 * x.signum()
                }
            })
            .collect();
        let dphi = q
            .iter()
            .map(|&x: &f64| if x.abs() <= 1.0 { 6.0 * x * x } else { 6.0 })
            .collect();
        Table::new(q, phi, dphi).unwrap()
    }

    #[test]
    fn interpolant_hits_nodes() {
        let t = cubic_table(81);
        for (q, _, d) in t.rows().collect::<Vec<_>>() {
            assert!((t.deriv(q) - d).abs() < 1e-12);
        }
        assert_eq!(t.eval(0.0), 0.0);
    }

    #[test]
    fn derivative_is_monotone_between_monotone_nodes() {
        let t = cubic_table(41);
        let mut prev = t.deriv(0.0);
        for k in 1..=4000 {
            let d = t.deriv(3.0 * k as f64 / 4000.0);
            assert!(d >= prev - 1e-12);
            prev = d;
        }
    }

    #[test]
    fn primitive_matches_quadrature() {
        let t = cubic_table(41);
        // composite Simpson on the interpolated derivative
        let (a, b) = (0.0, 1.37);
        let m = 2000;
        let h = (b - a) / m as f64;
        let mut acc = t.deriv(a) + t.deriv(b);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * t.deriv(a + k as f64 * h);
        }
        let simpson = acc * h / 3.0;
        assert!((t.eval(b) - simpson).abs() < 1e-9);
    }

    #[test]
    fn rejects_inconsistent_or_malformed_tables() {
        assert!(Table::new(vec![0.0, 1.0], vec![0.0, 5.0], vec![1.0, 1.0]).is_err());
        assert!(Table::new(vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Table::new(vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
        assert!(Table::new(vec![0.0], vec![0.0], vec![1.0]).is_err());
    }
}
