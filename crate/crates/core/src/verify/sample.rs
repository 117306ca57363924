//! Randomized spot checks of a certificate: sandwich bounds and continuity of V.

use rand::Rng;

use super::check::evaluate_v_in;
use crate::linalg::{Mat, Vector};
use crate::lmi::Certificate;
use crate::reformulate::AugmentedSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub samples: usize,
    /// Largest relative violation of σ₁‖Δx‖² ≤ V ≤ σ₂‖Δx‖².
    pub max_bound_violation: f64,
    /// Largest |V_from − V_to| / (1 + |V|) on facets.
    pub max_facet_jump: f64,
}

/// A state whose output Cx lies in region `i`, drawn uniformly in output from a
/// box of half-width 3·max|breakpoint| (at least 1), with unit-box components
/// orthogonal to C.
pub fn random_state_in_region<R: Rng>(aug: &AugmentedSystem, i: usize, rng: &mut R) -> Vector {
    let (lo, hi) = output_range(aug, i);
    let q = rng.gen_range(lo..=hi);
    state_with_output(&aug.pwa.c, q, rng)
}

fn output_range(aug: &AugmentedSystem, i: usize) -> (f64, f64) {
    let bps = aug.pwa.breakpoints();
    let reach = 3.0 * bps.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    let (lo, hi) = aug.pwa.approx.interval(i);
    (lo.max(-reach), hi.min(reach))
}

fn state_with_output<R: Rng>(c: &Mat, q: f64, rng: &mut R) -> Vector {
    let n = c.ncols();
    let ct = c.transpose().column(0).into_owned();
    let cc = ct.norm_squared();
    let mut x = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let along = ct.dot(&x) / cc;
    x.axpy(q / cc - along, &ct, 1.0);
    x
}

/// Checks the sandwich bounds on `per_cell` random pairs in every product cell,
/// and continuity of V on `per_cell` random points of every facet.
pub fn sample_certificate<R: Rng>(
    cert: &Certificate,
    aug: &AugmentedSystem,
    per_cell: usize,
    rng: &mut R,
) -> SampleReport {
    let (s1, s2, _) = cert.sigma;
    let big = aug.regions;
    let mut report = SampleReport {
        samples: 0,
        max_bound_violation: 0.0,
        max_facet_jump: 0.0,
    };
    for i in 0..big {
        for j in 0..big {
            for _ in 0..per_cell {
                let x = random_state_in_region(aug, i, rng);
                let xt = random_state_in_region(aug, j, rng);
                let d2 = (&x - &xt).norm_squared();
                if d2 == 0.0 {
                    continue;
                }
                let v = evaluate_v_in(cert, aug, i, j, &x, &xt);
                let low = (s1 * d2 - v) / (s1 * d2);
                let high = (v - s2 * d2) / (s2 * d2);
                report.max_bound_violation = report.max_bound_violation.max(low).max(high);
                report.samples += 1;
            }
        }
    }
    let norm = aug.pwa.c.norm();
    for f in &aug.facets {
        let q = f.boundary;
        for _ in 0..per_cell {
            // the crossing side sits on the boundary; the other keeps its region
            let (x, xt) = if f.from.0 == f.to.0 {
                (
                    random_state_in_region(aug, f.from.0, rng),
                    state_with_output(&aug.pwa.c, q, rng),
                )
            } else {
                (
                    state_with_output(&aug.pwa.c, q, rng),
                    random_state_in_region(aug, f.from.1, rng),
                )
            };
            debug_assert!(
                (f.e.row(0) * aug.lift(&x, &xt))[0].abs() < 1e-9 * (1.0 + q.abs()) * norm.max(1.0)
            );
            let a = evaluate_v_in(cert, aug, f.from.0, f.from.1, &x, &xt);
            let b = evaluate_v_in(cert, aug, f.to.0, f.to.1, &x, &xt);
            report.max_facet_jump = report.max_facet_jump.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    report
}
