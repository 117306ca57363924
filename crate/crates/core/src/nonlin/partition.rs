//! Optimal piecewise-affine approximation with a Lipschitz bound on the error.
//!
//! The image of φ′ over each half line is divided into bands of equal length;
//! every band becomes one region whose slope is the band midpoint. On a region
//! the error derivative ε′ = φ′ − rᵢ therefore stays within half the band
//! length, and for odd φ with φ′ monotone on R₊ the resulting
//! η = ℓ(φ′(R₊)) / (2(m + 1)) is the smallest achievable with 2m + 1 regions.

use super::catalog::Nonlinearity;
use crate::error::{Error, Result};

/// Relative continuity residual accepted at a breakpoint.
pub const CONTINUITY_TOL: f64 = 1e-9;

/// Slack allowed between the empirical error slope and the claimed η.
pub const EMPIRICAL_ETA_SLACK: f64 = 1e-6;

const MONOTONE_SAMPLES: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct PwaApproximation {
    /// q₁ < … < q_{N−1}.
    pub breakpoints: Vec<f64>,
    /// r₁ … r_N, left to right.
    pub slopes: Vec<f64>,
    /// s₁ … s_N, left to right.
    pub intercepts: Vec<f64>,
    /// Lipschitz constant of ε = φ − φ_PWA.
    pub eta: f64,
}

impl PwaApproximation {
    /// Checks ordering, sizes, continuity and φ_PWA(0) = 0.
    pub fn validate(&self) -> Result<()> {
        let n = self.slopes.len();
        if n == 0 || self.intercepts.len() != n || self.breakpoints.len() + 1 != n {
            return Err(Error::Argument(format!(
                "approximation with {} slopes, {} intercepts, {} breakpoints",
                n,
                self.intercepts.len(),
                self.breakpoints.len()
            )));
        }
        let all = self
            .breakpoints
            .iter()
            .chain(&self.slopes)
            .chain(&self.intercepts);
        if all.clone().any(|v| !v.is_finite()) || !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Argument("non-finite approximation data".into()));
        }
        if self.breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        for (k, &b) in self.breakpoints.iter().enumerate() {
            let left = self.slopes[k] * b + self.intercepts[k];
            let right = self.slopes[k + 1] * b + self.intercepts[k + 1];
            if (left - right).abs() > CONTINUITY_TOL * (1.0 + left.abs().max(right.abs())) {
                return Err(Error::Argument(format!(
                    "discontinuous at breakpoint {b}: {left} vs {right}"
                )));
            }
        }
        if evaluate_pwa(self, 0.0).abs() > CONTINUITY_TOL {
            return Err(Error::Argument("approximation does not vanish at 0".into()));
        }
        Ok(())
    }

    pub fn regions(&self) -> usize {
        self.slopes.len()
    }

    /// Index of the region containing q; a breakpoint belongs to the region on its right.
    pub fn region_of(&self, q: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= q)
    }

    /// Closed interval of region `i`, with infinite ends for the outer regions.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.breakpoints[i - 1]
        };
        let hi = if i + 1 == self.regions() {
            f64::INFINITY
        } else {
            self.breakpoints[i]
        };
        (lo, hi)
    }

    /// ε(q) = φ(q) − φ_PWA(q).
    pub fn error(&self, nl: &Nonlinearity, q: f64) -> f64 {
        nl.eval(q) - evaluate_pwa(self, q)
    }
}

pub fn evaluate_pwa(approx: &PwaApproximation, q: f64) -> f64 {
    let i = approx.region_of(q);
    approx.slopes[i] * q + approx.intercepts[i]
}

/// Length of the interval φ′(R₊).
pub fn derivative_image_length(nl: &Nonlinearity) -> Result<f64> {
    if let Some(l) = nl.analytic_image_length() {
        return Ok(l);
    }
    Ok(half_line(nl, false)?.length())
}

/// m = ⌈ℓ / (2η_ref)⌉ − 1 clamped at 0, and N = 2m + 1.
pub fn required_partition_size(nl: &Nonlinearity, eta_ref: f64) -> Result<(usize, usize)> {
    check_eta_ref(eta_ref)?;
    let m = levels_for(derivative_image_length(nl)?, eta_ref);
    Ok((m, 2 * m + 1))
}

/// Builds the approximation with η ≤ η_ref using the fewest bands per half line.
pub fn build_partition(nl: &Nonlinearity, eta_ref: f64) -> Result<PwaApproximation> {
    check_eta_ref(eta_ref)?;
    let pos = half_line(nl, false)?;
    let neg = half_line(nl, true)?;
    let m_pos = levels_for(pos.length(), eta_ref);
    let m_neg = levels_for(neg.length(), eta_ref);
    let mut approx = construct(nl, &pos, &neg, m_pos, m_neg)?;
    // a snapped integer ratio means η = η_ref exactly; drop the rounding excess
    if approx.eta > eta_ref && approx.eta - eta_ref <= SNAP_TOL * eta_ref {
        approx.eta = eta_ref;
    }
    Ok(approx)
}

/// Builds the approximation with exactly `m` interior levels on each half line
/// (2m + 1 regions for φ′ moving the same way on both sides).
pub fn build_partition_with_levels(nl: &Nonlinearity, m: usize) -> Result<PwaApproximation> {
    let pos = half_line(nl, false)?;
    let neg = half_line(nl, true)?;
    construct(nl, &pos, &neg, m, m)
}

/// Largest |φ′(q) − rᵢ| over a dense grid, compared against `approx.eta`.
pub fn verify_error_lipschitz(
    nl: &Nonlinearity,
    approx: &PwaApproximation,
    grid_size: usize,
) -> Result<f64> {
    if grid_size < 1000 {
        return Err(Error::Argument(format!(
            "grid size {grid_size} below the minimum of 1000"
        )));
    }
    let outer = approx
        .breakpoints
        .iter()
        .fold(nl.reach()?, |a, b| a.max(b.abs()))
        * 1.5;
    let mut worst: f64 = 0.0;
    let mut probe = |q: f64, region: usize| {
        let e = (nl.deriv(q) - approx.slopes[region]).abs();
        worst = worst.max(e);
    };
    let uniform = grid_size * 3 / 4;
    for k in 0..=uniform {
        let q = -outer + 2.0 * outer * k as f64 / uniform as f64;
        probe(q, approx.region_of(q));
    }
    // one-sided limits at every breakpoint, where the supremum is attained
    for (k, &b) in approx.breakpoints.iter().enumerate() {
        probe(b, k);
        probe(b, k + 1);
    }
    let tail = (grid_size - uniform) / 2;
    let ratio = (1e6_f64).powf(1.0 / tail.max(1) as f64);
    let mut q = outer;
    for _ in 0..tail {
        q *= ratio;
        probe(q, approx.regions() - 1);
        probe(-q, 0);
    }
    if !worst.is_finite() {
        return Err(Error::MalformedNonlinearity(
            "non-finite derivative on verification grid".into(),
        ));
    }
    if worst > approx.eta + EMPIRICAL_ETA_SLACK {
        return Err(Error::ApproximationInvalid {
            empirical: worst,
            eta: approx.eta,
        });
    }
    Ok(worst)
}

fn check_eta_ref(eta_ref: f64) -> Result<()> {
    if !(eta_ref > 0.0 && eta_ref.is_finite()) {
        return Err(Error::Argument(format!(
            "eta_ref must be positive and finite, got {eta_ref}"
        )));
    }
    Ok(())
}

/// Relative distance below which ℓ/(2η_ref) counts as an integer.
const SNAP_TOL: f64 = 1e-12;

fn levels_for(length: f64, eta_ref: f64) -> usize {
    let ratio = length / (2.0 * eta_ref);
    // ratios that are integers up to rounding must not gain a spurious level
    let nearest = ratio.round();
    let ceil = if (ratio - nearest).abs() <= SNAP_TOL * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    (ceil - 1.0).max(0.0) as usize
}

/// Range of φ′ over one half line, which must be monotone there.
#[derive(Debug, Clone, Copy)]
struct HalfLine {
    negative: bool,
    at_zero: f64,
    limit: f64,
}

impl HalfLine {
    fn length(&self) -> f64 {
        (self.limit - self.at_zero).abs()
    }

    fn level(&self, t: usize, m: usize) -> f64 {
        self.at_zero + (self.limit - self.at_zero) * t as f64 / (m + 1) as f64
    }
}

fn half_line(nl: &Nonlinearity, negative: bool) -> Result<HalfLine> {
    let (k1, k2) = nl.asymptotic_slopes();
    let at_zero = nl.deriv(0.0);
    if !at_zero.is_finite() {
        return Err(Error::MalformedNonlinearity(
            "non-finite derivative at 0".into(),
        ));
    }
    let limit = if negative { k1 } else { k2 };
    let samples = nl.half_line_samples(negative, MONOTONE_SAMPLES)?;
    let scale = samples.iter().fold(1.0_f64, |a, (_, d)| a.max(d.abs()));
    let tol = 1e-12 * scale;
    let dir = (limit - at_zero).signum();
    // samples are ordered by increasing |q|
    let monotone = samples
        .windows(2)
        .all(|w| dir * (w[1].1 - w[0].1) >= -tol || (limit - at_zero).abs() <= tol);
    let within = samples.iter().all(|(_, d)| {
        let lo = at_zero.min(limit) - tol;
        let hi = at_zero.max(limit) + tol;
        *d >= lo && *d <= hi
    });
    if !(monotone && within) {
        return Err(Error::AssumptionViolation(format!(
            "phi' is not monotone on the {} half line",
            if negative { "negative" } else { "positive" }
        )));
    }
    Ok(HalfLine {
        negative,
        at_zero,
        limit,
    })
}

/// Solves φ′(q) = level on the half line by bisection; returns q with its sign.
fn solve_level(nl: &Nonlinearity, side: &HalfLine, level: f64) -> Result<f64> {
    let sign = if side.negative { -1.0 } else { 1.0 };
    let g = |u: f64| nl.deriv(sign * u) - level;
    let mut lo = 0.0;
    let mut hi = nl.reach()?;
    let g_lo = g(lo);
    let mut grow = 0;
    while g_lo * g(hi) > 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::AssumptionViolation(format!(
                "cannot bracket phi'(q) = {level} on the {} half line",
                if side.negative {
                    "negative"
                } else {
                    "positive"
                }
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) * g_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

fn construct(
    nl: &Nonlinearity,
    pos: &HalfLine,
    neg: &HalfLine,
    m_pos: usize,
    m_neg: usize,
) -> Result<PwaApproximation> {
    if m_pos == 0 && m_neg == 0 {
        let candidates = [pos.at_zero, pos.limit, neg.limit];
        let lo = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return Ok(PwaApproximation {
            breakpoints: vec![],
            slopes: vec![0.5 * (lo + hi)],
            intercepts: vec![0.0],
            eta: 0.5 * (hi - lo),
        });
    }

    let mirror = nl.flags().odd && m_pos == m_neg;
    let mut q_pos = Vec::with_capacity(m_pos);
    for t in 1..=m_pos {
        q_pos.push(solve_level(nl, pos, pos.level(t, m_pos))?);
    }
    let mut q_neg = Vec::with_capacity(m_neg);
    for t in 1..=m_neg {
        if mirror {
            q_neg.push(-q_pos[t - 1]);
        } else {
            q_neg.push(solve_level(nl, neg, neg.level(t, m_neg))?);
        }
    }

    // (band_lo, band_hi) per region, left to right, alongside the breakpoints
    let mut bands: Vec<(f64, f64)> = Vec::new();
    let mut breakpoints: Vec<f64> = Vec::new();
    let band = |side: &HalfLine, m: usize, t: usize| {
        let a = side.level(t, m);
        let b = side.level(t + 1, m);
        (a.min(b), a.max(b))
    };
    for t in (1..=m_neg).rev() {
        bands.push(band(neg, m_neg, t));
        breakpoints.push(q_neg[t - 1]);
    }
    let (first_neg, first_pos) = (band(neg, m_neg, 0), band(pos, m_pos, 0));
    let same_direction = (pos.limit - pos.at_zero) * (neg.limit - neg.at_zero) >= 0.0;
    if same_direction {
        bands.push((first_neg.0.min(first_pos.0), first_neg.1.max(first_pos.1)));
    } else {
        bands.push(first_neg);
        breakpoints.push(0.0);
        bands.push(first_pos);
    }
    for t in 1..=m_pos {
        breakpoints.push(q_pos[t - 1]);
        bands.push(band(pos, m_pos, t));
    }

    let slopes: Vec<f64> = bands.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let widest = bands
        .iter()
        .map(|(lo, hi)| 0.5 * (hi - lo))
        .fold(0.0_f64, f64::max);
    // closed form ℓ/(2(m+1)) per side, free of the level arithmetic's rounding
    let eta = [(pos, m_pos), (neg, m_neg)]
        .iter()
        .map(|(side, m)| side.length() / (2.0 * (*m as f64 + 1.0)))
        .fold(0.0_f64, f64::max);
    if (widest - eta).abs() > 1e-9 * eta.max(1.0) {
        return Err(Error::ApproximationInvalid {
            empirical: widest,
            eta,
        });
    }

    let n = slopes.len();
    let mut intercepts = vec![0.0; n];
    let center = breakpoints.partition_point(|&b| b <= 0.0);
    for i in center + 1..n {
        let b = breakpoints[i - 1];
        intercepts[i] = intercepts[i - 1] + (slopes[i - 1] - slopes[i]) * b;
    }
    for i in (0..center).rev() {
        let b = breakpoints[i];
        intercepts[i] = intercepts[i + 1] + (slopes[i + 1] - slopes[i]) * b;
    }
    if mirror {
        // exact odd symmetry: s_{N−1−i} = −s_i
        for i in 0..n / 2 {
            intercepts[i] = -intercepts[n - 1 - i];
        }
    }

    let approx = PwaApproximation {
        breakpoints,
        slopes,
        intercepts,
        eta,
    };
    approx.validate()?;
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlin::catalog::PolyTerm;

    /// Brute-force sup of |φ′| − inf over [0, R] by uniform sampling, with the limit appended.
    fn sampled_length(nl: &Nonlinearity, r: f64) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=200_000 {
            let d = nl.deriv(r * k as f64 / 200_000.0);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let k2 = nl.asymptotic_slopes().1;
        hi.max(k2) - lo.min(k2)
    }

    #[test]
    fn image_length_examples() {
        let cubic = Nonlinearity::cubic_saturation();
        assert_eq!(derivative_image_length(&cubic).unwrap(), 6.0);
        assert!((sampled_length(&cubic, 3.0) - 6.0).abs() < 1e-9);

        assert_eq!(
            derivative_image_length(&Nonlinearity::linear(3.0).unwrap()).unwrap(),
            0.0
        );

        let tanh = Nonlinearity::tanh(1.0, 1.0).unwrap();
        assert_eq!(derivative_image_length(&tanh).unwrap(), 1.0);
        assert!((sampled_length(&tanh, 40.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn image_length_sampled_path_for_mixed_polynomial() {
        // φ′ = 1 + 3q² − ... with a negative coefficient falls back to sampling
        let nl = Nonlinearity::poly_sat(
            vec![
                PolyTerm {
                    power: 1.0,
                    coeff: 1.0,
                },
                PolyTerm {
                    power: 3.0,
                    coeff: 1.0,
                },
                PolyTerm {
                    power: 5.0,
                    coeff: -0.1,
                },
            ],
            1.0,
        )
        .unwrap();
        assert!(nl.analytic_image_length().is_none());
        let l = derivative_image_length(&nl).unwrap();
        // φ′(0) = 1, φ′(1) = 1 + 3 − 0.5 = 3.5, monotone on [0, 1]
        assert!((l - 2.5).abs() < 1e-9, "{l}");
        assert!((sampled_length(&nl, 2.0) - 2.5).abs() < 1e-9);
    }

    #[test]
    fn partition_size_examples() {
        let cubic = Nonlinearity::cubic_saturation();
        assert_eq!(required_partition_size(&cubic, 0.8).unwrap(), (3, 7));
        let lin = Nonlinearity::linear(2.0).unwrap();
        assert_eq!(required_partition_size(&lin, 0.1).unwrap(), (0, 1));
        let tanh = Nonlinearity::tanh(1.0, 1.0).unwrap();
        assert_eq!(required_partition_size(&tanh, 0.2).unwrap(), (2, 5));
        assert!(required_partition_size(&tanh, 0.0).is_err());
        assert!(required_partition_size(&tanh, -1.0).is_err());
    }

    #[test]
    fn integral_ratio_does_not_add_a_level() {
        let nl = Nonlinearity::tanh_deadzone(6.0, 1.0).unwrap();
        // 6 / (2 * 0.3) is 10.000000000000002 in floating point
        assert_eq!(required_partition_size(&nl, 0.3).unwrap(), (9, 19));
    }

    #[test]
    fn cubic_saturation_partition() {
        let nl = Nonlinearity::cubic_saturation();
        let a = build_partition(&nl, 0.8).unwrap();
        assert_eq!(a.regions(), 7);
        assert!((a.eta - 0.75).abs() < 1e-12);
        let expect = [
            -(0.75_f64).sqrt(),
            -(0.5_f64).sqrt(),
            -0.5,
            0.5,
            (0.5_f64).sqrt(),
            (0.75_f64).sqrt(),
        ];
        for (b, e) in a.breakpoints.iter().zip(expect) {
            assert!((b - e).abs() < 1e-10, "{b} vs {e}");
        }
        let slopes = [5.25, 3.75, 2.25, 0.75, 2.25, 3.75, 5.25];
        for (r, e) in a.slopes.iter().zip(slopes) {
            assert!((r - e).abs() < 1e-12);
        }
        assert_eq!(a.intercepts[3], 0.0);
        // a_i = −s_i B: region right of 0.5 has s = −0.75
        assert!((a.intercepts[4] + 0.75).abs() < 1e-12);
        assert!((a.intercepts[2] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn evaluate_examples() {
        let nl = Nonlinearity::cubic_saturation();
        let a = build_partition(&nl, 0.8).unwrap();
        assert_eq!(evaluate_pwa(&a, 0.0), 0.0);
        let b = a.breakpoints[3];
        let v = evaluate_pwa(&a, b);
        assert!((v - 0.375).abs() < 1e-12);
        assert!((0.75 * b - v).abs() < 1e-12);
        assert!((2.25 * b - 0.75 - v).abs() < 1e-12);
        let e = a.error(&nl, 0.5);
        assert!((e + 0.125).abs() < 1e-12);
        assert!(e.abs() <= a.eta * 0.5);
    }

    #[test]
    fn linear_gives_single_exact_region() {
        let nl = Nonlinearity::linear(2.5).unwrap();
        let a = build_partition(&nl, 0.3).unwrap();
        assert_eq!(a.regions(), 1);
        assert_eq!(a.slopes, vec![2.5]);
        assert_eq!(a.intercepts, vec![0.0]);
        assert_eq!(a.eta, 0.0);
        assert_eq!(verify_error_lipschitz(&nl, &a, 1000).unwrap(), 0.0);
    }

    #[test]
    fn tanh_partition() {
        let nl = Nonlinearity::tanh(1.0, 1.0).unwrap();
        let a = build_partition(&nl, 0.2).unwrap();
        assert_eq!(a.regions(), 5);
        assert!((a.eta - 1.0 / 6.0).abs() < 1e-12);
        let emp = verify_error_lipschitz(&nl, &a, 100_000).unwrap();
        assert!((emp - 1.0 / 6.0).abs() < 1e-4, "{emp}");
    }

    #[test]
    fn cubic_saturation_empirical_eta() {
        let nl = Nonlinearity::cubic_saturation();
        let a = build_partition(&nl, 0.8).unwrap();
        let emp = verify_error_lipschitz(&nl, &a, 100_000).unwrap();
        assert!((emp - 0.75).abs() < 1e-4);
    }

    #[test]
    fn corrupted_slope_is_rejected() {
        let nl = Nonlinearity::cubic_saturation();
        let mut a = build_partition(&nl, 0.8).unwrap();
        a.slopes[0] += 0.5;
        assert!(matches!(
            verify_error_lipschitz(&nl, &a, 10_000),
            Err(Error::ApproximationInvalid { .. })
        ));
        assert!(verify_error_lipschitz(&nl, &a, 10).is_err());
    }

    #[test]
    fn forced_single_region_is_sector_description() {
        let nl = Nonlinearity::cubic_saturation();
        let a = build_partition_with_levels(&nl, 0).unwrap();
        assert_eq!(a.slopes, vec![3.0]);
        assert_eq!(a.eta, 3.0);
        let a = build_partition(&nl, 6.0).unwrap();
        assert_eq!(a.regions(), 1);
    }

    #[test]
    fn asymmetric_table_splits_at_origin() {
        // φ′ rises to 2 on the right and falls to 0 on the left
        let q: Vec<f64> = (0..=80).map(|k| -4.0 + 0.1 * k as f64).collect();
        let d = |x: f64| 1.0 + x.tanh();
        let dphi: Vec<f64> = q.iter().map(|&x| d(x)).collect();
        let phi: Vec<f64> = q.iter().map(|&x| x + x.cosh().ln()).collect();
        let nl = Nonlinearity::tabulated(q, phi, dphi).unwrap();
        assert!(!nl.flags().odd);
        let a = build_partition(&nl, 0.25).unwrap();
        assert!(a.breakpoints.contains(&0.0));
        assert!(a.eta <= 0.25 + 1e-12);
        verify_error_lipschitz(&nl, &a, 20_000).unwrap();
    }

    #[test]
    fn non_monotone_derivative_is_an_assumption_violation() {
        // φ′ = 1 + 3q² − 5q⁴/2 on [0, 1] peaks inside the interval
        let nl = Nonlinearity::poly_sat(
            vec![
                PolyTerm {
                    power: 1.0,
                    coeff: 1.0,
                },
                PolyTerm {
                    power: 3.0,
                    coeff: 1.0,
                },
                PolyTerm {
                    power: 5.0,
                    coeff: -0.5,
                },
            ],
            1.0,
        )
        .unwrap();
        assert!(matches!(
            build_partition(&nl, 0.1),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn integer_ratios_land_exactly_on_eta_ref() {
        let nl = Nonlinearity::cubic_saturation();
        for (eta_ref, big) in [(0.6, 9), (0.3, 19), (0.2, 29), (0.12, 49), (0.04, 149)] {
            let a = build_partition(&nl, eta_ref).unwrap();
            assert_eq!(a.regions(), big);
            assert!(a.eta <= eta_ref, "{} > {eta_ref}", a.eta);
            assert!((a.eta - eta_ref).abs() <= 1e-15);
        }
    }
}
