use super::table::Table;
use crate::error::{Error, Result};

/// Absolute tolerance on |φ′(q) − k| that defines "asymptotic regime reached".
pub const ASYMPTOTE_TOL: f64 = 1e-8;

const REACH_CAP: f64 = 1e15;

/// One term `coeff · sign(q)·|q|^power` of an odd polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyTerm {
    pub power: f64,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityKind {
    /// φ(q) = slope·q.
    Linear { slope: f64 },
    /// Odd polynomial Σ cₖ sign(q)|q|^pₖ on |q| ≤ knee, continued linearly with
    /// the knee slope beyond (C¹ at the knee).
    PolySat { terms: Vec<PolyTerm>, knee: f64 },
    /// φ(q) = gain·scale·tanh(q/scale), so φ′(0) = gain and φ′(±∞) = 0.
    Tanh { gain: f64, scale: f64 },
    /// φ(q) = gain·scale·atan(q/scale).
    Atan { gain: f64, scale: f64 },
    /// φ(q) = slope·(q − width·tanh(q/width)), a smooth dead zone: φ′ = slope·tanh².
    TanhDeadzone { slope: f64, width: f64 },
    /// φ(q) = slope·(q − width·atan(q/width)), φ′ = slope·q²/(q² + width²).
    AtanDeadzone { slope: f64, width: f64 },
    /// Samples (q, φ, φ′) with a monotone cubic interpolant for φ′.
    Tabulated(Table),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub c1: bool,
    pub asymptotically_linear: bool,
    pub odd: bool,
    pub monotone: bool,
    pub deriv_nondecreasing_on_rplus: bool,
}

impl Flags {
    /// Continuously differentiable and asymptotically linear.
    pub fn assumption1(&self) -> bool {
        self.c1 && self.asymptotically_linear
    }

    /// Odd, monotone, with φ′ nondecreasing on the positive half line.
    pub fn assumption2(&self) -> bool {
        self.odd && self.monotone && self.deriv_nondecreasing_on_rplus
    }
}

/// A scalar memoryless nonlinearity φ with φ(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    flags: Flags,
    asymptotic_slopes: (f64, f64),
    lipschitz: f64,
}

impl Nonlinearity {
    fn finish(kind: NonlinearityKind) -> Result<Self> {
        let mut nl = Nonlinearity {
            kind,
            flags: Flags::default(),
            asymptotic_slopes: (0.0, 0.0),
            lipschitz: 0.0,
        };
        nl.asymptotic_slopes = nl.limits();
        nl.flags = nl.compute_flags()?;
        nl.lipschitz = nl.compute_lipschitz()?;
        Ok(nl)
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !slope.is_finite() {
            return Err(Error::MalformedNonlinearity("non-finite slope".into()));
        }
        Self::finish(NonlinearityKind::Linear { slope })
    }

    pub fn poly_sat(terms: Vec<PolyTerm>, knee: f64) -> Result<Self> {
        if !(knee > 0.0 && knee.is_finite()) {
            return Err(Error::MalformedNonlinearity(format!(
                "knee must be positive and finite, got {knee}"
            )));
        }
        if terms.is_empty() {
            return Err(Error::MalformedNonlinearity(
                "polynomial without terms".into(),
            ));
        }
        for t in &terms {
            if !(t.power >= 1.0 && t.power.is_finite() && t.coeff.is_finite()) {
                return Err(Error::MalformedNonlinearity(format!(
                    "polynomial term needs finite power >= 1 and finite coefficient, got {t:?}"
                )));
            }
        }
        Self::finish(NonlinearityKind::PolySat { terms, knee })
    }

    /// φ(q) = 2q³ for |q| ≤ 1 and 6q − 4·sign(q) beyond.
    pub fn cubic_saturation() -> Self {
        Self::poly_sat(
            vec![PolyTerm {
                power: 3.0,
                coeff: 2.0,
            }],
            1.0,
        )
        .expect("static parameters are valid")
    }

    pub fn tanh(gain: f64, scale: f64) -> Result<Self> {
        check_scale(gain, scale)?;
        Self::finish(NonlinearityKind::Tanh { gain, scale })
    }

    pub fn atan(gain: f64, scale: f64) -> Result<Self> {
        check_scale(gain, scale)?;
        Self::finish(NonlinearityKind::Atan { gain, scale })
    }

    pub fn tanh_deadzone(slope: f64, width: f64) -> Result<Self> {
        check_scale(slope, width)?;
        Self::finish(NonlinearityKind::TanhDeadzone { slope, width })
    }

    pub fn atan_deadzone(slope: f64, width: f64) -> Result<Self> {
        check_scale(slope, width)?;
        Self::finish(NonlinearityKind::AtanDeadzone { slope, width })
    }

    pub fn tabulated(q: Vec<f64>, phi: Vec<f64>, dphi: Vec<f64>) -> Result<Self> {
        let table = Table::new(q, phi, dphi)?;
        Self::finish(NonlinearityKind::Tabulated(table))
    }

    /// Catalog lookup used by system description files.
    ///
    /// | id              | parameters                         |
    /// |-----------------|------------------------------------|
    /// | `linear`        | `[slope]`                          |
    /// | `poly_sat`      | `[knee, p1, c1, p2, c2, ...]`      |
    /// | `tanh`, `atan`  | `[gain, scale]`                    |
    /// | `tanh_deadzone`, `atan_deadzone` | `[slope, width]`  |
    pub fn from_catalog(id: &str, params: &[f64]) -> Result<Self> {
        let want = |k: usize| -> Result<()> {
            if params.len() != k {
                return Err(Error::Argument(format!(
                    "catalog entry `{id}` takes {k} parameters, got {}",
                    params.len()
                )));
            }
            Ok(())
        };
        match id {
            "linear" => {
                want(1)?;
                Self::linear(params[0])
            }
            "poly_sat" => {
                if params.len() < 3 || params.len() % 2 == 0 {
                    return Err(Error::Argument(
                        "poly_sat takes [knee, power1, coeff1, power2, coeff2, ...]".into(),
                    ));
                }
                let terms = params[1..]
                    .chunks(2)
                    .map(|c| PolyTerm {
                        power: c[0],
                        coeff: c[1],
                    })
                    .collect();
                Self::poly_sat(terms, params[0])
            }
            "tanh" => {
                want(2)?;
                Self::tanh(params[0], params[1])
            }
            "atan" => {
                want(2)?;
                Self::atan(params[0], params[1])
            }
            "tanh_deadzone" => {
                want(2)?;
                Self::tanh_deadzone(params[0], params[1])
            }
            "atan_deadzone" => {
                want(2)?;
                Self::atan_deadzone(params[0], params[1])
            }
            other => Err(Error::Argument(format!("unknown catalog entry `{other}`"))),
        }
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    /// Limits of φ′ at −∞ and +∞.
    pub fn asymptotic_slopes(&self) -> (f64, f64) {
        self.asymptotic_slopes
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, q: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Linear { slope } => slope * q,
            NonlinearityKind::PolySat { terms, knee } => {
                let a = q.abs();
                let s = q.signum();
                if a <= *knee {
                    s * poly_abs(terms, a)
                } else {
                    let slope = poly_deriv_abs(terms, *knee);
                    s * (poly_abs(terms, *knee) + slope * (a - knee))
                }
            }
            NonlinearityKind::Tanh { gain, scale } => gain * scale * (q / scale).tanh(),
            NonlinearityKind::Atan { gain, scale } => gain * scale * (q / scale).atan(),
            NonlinearityKind::TanhDeadzone { slope, width } => {
                slope * (q - width * (q / width).tanh())
            }
            NonlinearityKind::AtanDeadzone { slope, width } => {
                slope * (q - width * (q / width).atan())
            }
            NonlinearityKind::Tabulated(t) => t.eval(q),
        }
    }

    pub fn deriv(&self, q: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Linear { slope } => *slope,
            NonlinearityKind::PolySat { terms, knee } => poly_deriv_abs(terms, q.abs().min(*knee)),
            NonlinearityKind::Tanh { gain, scale } => {
                let c = (q / scale).cosh();
                if c.is_finite() {
                    gain / (c * c)
                } else {
                    0.0
                }
            }
            NonlinearityKind::Atan { gain, scale } => {
                let u = q / scale;
                gain / (1.0 + u * u)
            }
            NonlinearityKind::TanhDeadzone { slope, width } => {
                let t = (q / width).tanh();
                slope * t * t
            }
            NonlinearityKind::AtanDeadzone { slope, width } => {
                let w2 = width * width;
                slope * (1.0 - w2 / (q * q + w2))
            }
            NonlinearityKind::Tabulated(t) => t.deriv(q),
        }
    }

    fn limits(&self) -> (f64, f64) {
        match &self.kind {
            NonlinearityKind::Linear { slope } => (*slope, *slope),
            NonlinearityKind::PolySat { terms, knee } => {
                let s = poly_deriv_abs(terms, *knee);
                (s, s)
            }
            NonlinearityKind::Tanh { .. } | NonlinearityKind::Atan { .. } => (0.0, 0.0),
            NonlinearityKind::TanhDeadzone { slope, .. }
            | NonlinearityKind::AtanDeadzone { slope, .. } => (*slope, *slope),
            NonlinearityKind::Tabulated(t) => t.end_slopes(),
        }
    }

    /// Smallest R > 0 with |φ′(q) − k| ≤ 1e−8 on both sides for |q| ≥ R,
    /// found by geometric growth.
    pub fn reach(&self) -> Result<f64> {
        match &self.kind {
            NonlinearityKind::Linear { .. } => return Ok(1.0),
            NonlinearityKind::PolySat { knee, .. } => return Ok(*knee),
            NonlinearityKind::Tabulated(t) => return Ok(t.extent()),
            _ => {}
        }
        let (k1, k2) = self.asymptotic_slopes;
        let mut r = 1.0;
        while r < REACH_CAP {
            let dp = self.deriv(r);
            let dm = self.deriv(-r);
            if !(dp.is_finite() && dm.is_finite()) {
                return Err(Error::MalformedNonlinearity(format!(
                    "non-finite derivative at q = ±{r}"
                )));
            }
            if (dp - k2).abs() <= ASYMPTOTE_TOL && (dm - k1).abs() <= ASYMPTOTE_TOL {
                return Ok(r);
            }
            r *= 2.0;
        }
        Err(Error::AssumptionViolation(
            "derivative does not settle to its asymptotic slope".into(),
        ))
    }

    /// Dense sample of φ′ on [0, reach] (or [−reach, 0] for `negative`),
    /// uniform near the origin plus geometric points out to 4·reach.
    pub(crate) fn half_line_samples(
        &self,
        negative: bool,
        count: usize,
    ) -> Result<Vec<(f64, f64)>> {
        let reach = self.reach()?;
        let sign = if negative { -1.0 } else { 1.0 };
        let mut out = Vec::with_capacity(count + 64);
        for k in 0..=count {
            let q = reach * k as f64 / count as f64;
            out.push(q);
        }
        let mut q = reach;
        for _ in 0..64 {
            q *= 1.25;
            if q > 4.0 * reach {
                break;
            }
            out.push(q);
        }
        out.into_iter()
            .map(|q| {
                let d = self.deriv(sign * q);
                if d.is_finite() {
                    Ok((sign * q, d))
                } else {
                    Err(Error::MalformedNonlinearity(format!(
                        "non-finite derivative at q = {}",
                        sign * q
                    )))
                }
            })
            .collect()
    }

    fn compute_flags(&self) -> Result<Flags> {
        let c1 = true;
        match &self.kind {
            NonlinearityKind::Linear { slope } => Ok(Flags {
                c1,
                asymptotically_linear: true,
                odd: true,
                monotone: *slope >= 0.0,
                deriv_nondecreasing_on_rplus: true,
            }),
            NonlinearityKind::PolySat { terms, .. } if terms.iter().all(|t| t.coeff >= 0.0) => {
                Ok(Flags {
                    c1,
                    asymptotically_linear: true,
                    odd: true,
                    monotone: true,
                    deriv_nondecreasing_on_rplus: true,
                })
            }
            NonlinearityKind::Tanh { gain, .. } | NonlinearityKind::Atan { gain, .. } => {
                Ok(Flags {
                    c1,
                    asymptotically_linear: true,
                    odd: true,
                    monotone: *gain >= 0.0,
                    deriv_nondecreasing_on_rplus: *gain <= 0.0,
                })
            }
            NonlinearityKind::TanhDeadzone { slope, .. }
            | NonlinearityKind::AtanDeadzone { slope, .. } => Ok(Flags {
                c1,
                asymptotically_linear: true,
                odd: true,
                monotone: *slope >= 0.0,
                deriv_nondecreasing_on_rplus: *slope >= 0.0,
            }),
            _ => self.sampled_flags(),
        }
    }

    fn sampled_flags(&self) -> Result<Flags> {
        let asymptotically_linear = self.reach().is_ok();
        if !asymptotically_linear {
            return Ok(Flags {
                c1: true,
                ..Flags::default()
            });
        }
        let pos = self.half_line_samples(false, 4000)?;
        let neg = self.half_line_samples(true, 4000)?;
        let scale = pos
            .iter()
            .chain(neg.iter())
            .fold(1.0_f64, |a, (_, d)| a.max(d.abs()));
        let tol = 1e-12 * scale;
        let monotone = pos.iter().chain(neg.iter()).all(|(_, d)| *d >= -tol)
            || pos.iter().chain(neg.iter()).all(|(_, d)| *d <= tol);
        let nondecreasing = pos.windows(2).all(|w| w[1].1 >= w[0].1 - tol);
        let odd = pos.iter().all(|(q, _)| {
            let a = self.eval(*q);
            let b = self.eval(-*q);
            (a + b).abs() <= 1e-9 * (1.0 + a.abs())
        });
        Ok(Flags {
            c1: true,
            asymptotically_linear,
            odd,
            monotone,
            deriv_nondecreasing_on_rplus: nondecreasing,
        })
    }

    fn compute_lipschitz(&self) -> Result<f64> {
        match &self.kind {
            NonlinearityKind::Linear { slope } => Ok(slope.abs()),
            NonlinearityKind::Tanh { gain, .. } | NonlinearityKind::Atan { gain, .. } => {
                Ok(gain.abs())
            }
            NonlinearityKind::TanhDeadzone { slope, .. }
            | NonlinearityKind::AtanDeadzone { slope, .. } => Ok(slope.abs()),
            _ => {
                let (k1, k2) = self.asymptotic_slopes;
                let pos = self.half_line_samples(false, 20_000)?;
                let neg = self.half_line_samples(true, 20_000)?;
                Ok(pos
                    .iter()
                    .chain(neg.iter())
                    .fold(k1.abs().max(k2.abs()), |a, (_, d)| a.max(d.abs())))
            }
        }
    }

    /// Closed-form length of φ′(R₊) where the catalog permits it.
    pub(crate) fn analytic_image_length(&self) -> Option<f64> {
        match &self.kind {
            NonlinearityKind::Linear { .. } => Some(0.0),
            NonlinearityKind::PolySat { terms, knee } if terms.iter().all(|t| t.coeff >= 0.0) => {
                Some(poly_deriv_abs(terms, *knee) - poly_deriv_abs(terms, 0.0))
            }
            NonlinearityKind::Tanh { gain, .. } | NonlinearityKind::Atan { gain, .. } => {
                Some(gain.abs())
            }
            NonlinearityKind::TanhDeadzone { slope, .. }
            | NonlinearityKind::AtanDeadzone { slope, .. } => Some(slope.abs()),
            _ => None,
        }
    }
}

fn check_scale(gain: f64, scale: f64) -> Result<()> {
    if !gain.is_finite() || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::MalformedNonlinearity(format!(
            "need finite gain and positive finite scale, got ({gain}, {scale})"
        )));
    }
    Ok(())
}

fn poly_abs(terms: &[PolyTerm], a: f64) -> f64 {
    terms.iter().map(|t| t.coeff * a.powf(t.power)).sum()
}

fn poly_deriv_abs(terms: &[PolyTerm], a: f64) -> f64 {
    terms
        .iter()
        .map(|t| {
            if t.power == 1.0 {
                t.coeff
            } else {
                t.coeff * t.power * a.powf(t.power - 1.0)
            }
        })
        .sum()
}
