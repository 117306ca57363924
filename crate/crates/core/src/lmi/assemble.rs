//! Piecewise-quadratic incremental Lyapunov conditions as an LMI problem.
//!
//! V is (x − x̃)ᵀPᵢ(x − x̃) on diagonal cells X_ii and x̄ᵀP̄_ij x̄ elsewhere.
//! Per diagonal cell: σ₁I ⪯ Pᵢ ⪯ σ₂I and the incremental dissipation block.
//! Per off-diagonal cell: the same three conditions on P̄_ij, relaxed to the
//! cell by S-procedure terms with nonnegative multipliers U, R, W. Per facet:
//! P̄ on both sides differ only by LĒ + ĒᵀLᵀ, which keeps V continuous.

use std::collections::BTreeMap;

use super::problem::{Expr, LmiProblem, RowKind, Sense, VarId, VarKind};
use crate::error::{Error, Result};
use crate::linalg::{put, vstack, Mat};
use crate::nonlin::PwaApproximation;
use crate::reformulate::{augment, to_pwa_lure, AugmentedSystem, LureSystem};

/// Weighting of the nonlinearity channel p̄ = (p, p̃) in the dissipation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaPWeighting {
    /// p̄ᵀ[[1, −1], [−1, 1]]p̄ = (p − p̃)², the increment the Lipschitz bound controls.
    #[default]
    Incremental,
    /// p̄ᵀp̄ = p² + p̃²; kept for comparison, not a sound supply rate.
    Identity,
}

/// Rows the S-procedure multipliers act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SProcedureRows {
    /// Cell inequalities Ḡ_ij plus the constant coordinate x̄_{2n+1} = 1 ≥ 0.
    #[default]
    WithConstant,
    /// Cell inequalities Ḡ_ij only.
    CellOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Minimize σ₂ − σ₁.
    #[default]
    SigmaGap,
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Lower bound standing in for strict positivity of σ₁ and σ₃.
    pub sigma_min: f64,
    /// Tie P̄_ji to P̄_ij through the (x, x̃) swap and assemble only i < j.
    pub swap_symmetry: bool,
    pub zero_diagonal_multipliers: bool,
    pub delta_p: DeltaPWeighting,
    pub s_rows: SProcedureRows,
    pub objective: Objective,
    /// Restrict P̄_ij to the face the bound and decrease conditions force on it
    /// and drop the directions every off-diagonal block annihilates.
    pub facial_reduction: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            sigma_min: 1e-6,
            swap_symmetry: true,
            zero_diagonal_multipliers: true,
            delta_p: DeltaPWeighting::default(),
            s_rows: SProcedureRows::default(),
            objective: Objective::default(),
            facial_reduction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CellVars {
    pub pbar: VarId,
    pub u: VarId,
    pub r: VarId,
    pub w: VarId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FacetSource {
    Own(VarId),
    /// Image of another facet under the swap.
    Mirror(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct ProblemIndex {
    pub n: usize,
    pub regions: usize,
    pub eta: f64,
    pub options: Option<AssemblyOptions>,
    pub p: Vec<VarId>,
    pub sigma: Vec<VarId>,
    pub cells: BTreeMap<(usize, usize), CellVars>,
    /// Rows of Gᵢ per region, needed to permute mirrored multipliers.
    pub cell_rows: Vec<usize>,
    pub facets: Vec<FacetSource>,
    /// T with P̄_ij = T·Q_ij·Tᵀ; the Pbar variables hold Q_ij.
    pub pbar_basis: Option<Mat>,
}

/// Variable and constraint counts of an assembled problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Census {
    pub p_vars: usize,
    pub pbar_vars: usize,
    pub multiplier_vars: usize,
    pub coupling_vars: usize,
    pub scalar_vars: usize,
    pub free_entries: usize,
    pub lmi_blocks: usize,
    pub equality_rows: usize,
    pub inequality_rows: usize,
}

impl LmiProblem {
    pub fn census(&self) -> Census {
        let mut c = Census {
            free_entries: self.num_entries(),
            lmi_blocks: self.blocks.len(),
            ..Census::default()
        };
        for v in &self.vars {
            let prefix = v.name.split('[').next().unwrap_or("");
            match prefix {
                "P" => c.p_vars += 1,
                "Pbar" => c.pbar_vars += 1,
                "U" | "R" | "W" => c.multiplier_vars += 1,
                "L" => c.coupling_vars += 1,
                _ if v.kind == VarKind::Scalar => c.scalar_vars += 1,
                _ => {}
            }
        }
        for r in &self.rows {
            match r.kind {
                RowKind::Eq => c.equality_rows += 1,
                RowKind::Geq => c.inequality_rows += 1,
            }
        }
        c
    }
}

/// [[P, −P, 0], [−P, P, 0], [0, 0, 0]], so x̄ᵀ·lift(P)·x̄ = (x − x̃)ᵀP(x − x̃).
pub fn lift_diagonal(p: &Mat) -> Mat {
    let l = lift_left(p.nrows());
    &l * p * l.transpose()
}

/// [I; −I; 0], the map Δx ↦ x̄-coordinates used by lift_diagonal.
pub(crate) fn lift_left(n: usize) -> Mat {
    let mut l = Mat::zeros(2 * n + 1, n);
    put(&mut l, 0, 0, &Mat::identity(n, n));
    put(&mut l, n, 0, &(-Mat::identity(n, n)));
    l
}

/// Matrix the S-procedure multipliers of cell (i, j) act on.
pub fn s_procedure_rows(aug: &AugmentedSystem, i: usize, j: usize, rows: SProcedureRows) -> Mat {
    let g = &aug.cell(i, j).g;
    match rows {
        SProcedureRows::CellOnly => g.clone(),
        SProcedureRows::WithConstant => {
            let mut one = Mat::zeros(1, aug.dim());
            one[(0, aug.dim() - 1)] = 1.0;
            vstack(&[g, &one])
        }
    }
}

/// Orthonormal basis of the column space of `m`.
fn orth(m: &Mat) -> Mat {
    if m.ncols() == 0 {
        return Mat::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-10 * top.max(1.0))
        .collect();
    Mat::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis of the orthogonal complement of the orthonormal columns of `q`.
fn complement(q: &Mat) -> Mat {
    let dim = q.nrows();
    let proj = Mat::identity(dim, dim) - q * q.transpose();
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = (0..dim).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    Mat::from_fn(dim, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
}

/// (T, Z) for the off-diagonal cells.
///
/// For w ∈ ker C the direction v = (w, w, 0) has J̄v = 0 and vanishes on every
/// S-procedure row, so the two bound conditions pin vᵀP̄v = 0 and hence P̄v = 0;
/// the decrease block then has a zero diagonal entry along v, forcing
/// P̄(Aw, Aw, 0) = 0 as well. Every feasible P̄ is therefore T·Q·Tᵀ with T
/// spanning the complement of {(u, u, 0) : u ∈ ker C + A·ker C}, and every
/// off-diagonal block annihilates {(w, w, 0) : w ∈ ker C}; Z spans the
/// complement of the latter. Without this the feasible set has no interior.
pub(crate) fn reduction_bases(aug: &AugmentedSystem) -> (Mat, Mat) {
    let n = aug.n;
    let c = &aug.pwa.c;
    let ker_c = complement(&orth(&c.transpose()));
    // Aᵢw = Aw on ker C for every region
    let a = &aug.pwa.cells[0].a;
    let mut both = Mat::zeros(n, 2 * ker_c.ncols());
    put(&mut both, 0, 0, &ker_c);
    put(&mut both, 0, ker_c.ncols(), &(a * &ker_c));
    let forced = orth(&both);
    let diag = |basis: &Mat| {
        let mut m = Mat::zeros(2 * n + 1, basis.ncols());
        put(&mut m, 0, 0, basis);
        put(&mut m, n, 0, basis);
        m / 2.0_f64.sqrt()
    };
    (complement(&diag(&forced)), complement(&diag(&ker_c)))
}

/// Tᵀ·X with rounding-level entries (relative to X) set to zero, so that
/// directions inside the forced kernel vanish exactly.
fn project(tt: &Mat, x: &Mat) -> Mat {
    let tol = 1e-13 * x.amax();
    (tt * x).map(|v| if v.abs() <= tol { 0.0 } else { v })
}

fn check_shapes(aug: &AugmentedSystem) -> Result<()> {
    let big = aug.regions;
    let dim = aug.dim();
    if aug.cells.len() != big * big {
        return Err(Error::Assembly(format!(
            "{} augmented cells for {big} regions",
            aug.cells.len()
        )));
    }
    if aug.facets.len() != 2 * big * (big - 1) {
        return Err(Error::Assembly(format!(
            "{} facets, expected {}",
            aug.facets.len(),
            2 * big * (big - 1)
        )));
    }
    if aug.facets.iter().any(|f| f.e.shape() != (1, dim)) {
        return Err(Error::Assembly("facet row with wrong width".into()));
    }
    if aug.b.shape() != (dim, 2) || aug.c.shape() != (1, dim) || aug.d.shape() != (1, 2) {
        return Err(Error::Assembly(
            "augmented input/output matrices malformed".into(),
        ));
    }
    Ok(())
}

pub fn assemble_pwq_lmis(
    aug: &AugmentedSystem,
    eta: f64,
    opts: &AssemblyOptions,
) -> Result<LmiProblem> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Argument(format!(
            "eta must be finite and >= 0, got {eta}"
        )));
    }
    if !(opts.sigma_min > 0.0) {
        return Err(Error::Argument("sigma_min must be positive".into()));
    }
    check_shapes(aug)?;
    let n = aug.n;
    let dim = aug.dim();
    let big = aug.regions;
    // η = 0 means ε ≡ 0: the channel p carries nothing and drops out
    let with_p = eta > 0.0;
    let inv_eta2 = if with_p { 1.0 / (eta * eta) } else { 0.0 };
    let d = aug.pwa.d;
    let b = &aug.pwa.b;
    let c = &aug.pwa.c;
    let eye_n = Mat::identity(n, n);
    let eye_dim = Mat::identity(dim, dim);
    let jbar = lift_diagonal(&eye_n);
    let lift = lift_left(n);

    let (t, z) = if opts.facial_reduction && big > 1 {
        reduction_bases(aug)
    } else {
        (eye_dim.clone(), eye_dim.clone())
    };
    let tt = t.transpose();
    let mut zp = Mat::zeros(dim + 1, z.ncols() + 1);
    put(&mut zp, 0, 0, &z);
    zp[(dim, z.ncols())] = 1.0;
    let mut zpp = Mat::zeros(dim + 2, z.ncols() + 2);
    put(&mut zpp, 0, 0, &z);
    put(&mut zpp, dim, z.ncols(), &Mat::identity(2, 2));

    let mut prob = LmiProblem::default();
    let mut index = ProblemIndex {
        n,
        regions: big,
        eta,
        options: Some(*opts),
        cell_rows: aug.pwa.cells.iter().map(|c| c.g.nrows()).collect(),
        pbar_basis: (opts.facial_reduction && big > 1).then(|| t.clone()),
        ..ProblemIndex::default()
    };

    let s1 = prob.add_var("sigma1", VarKind::Scalar);
    let s2 = prob.add_var("sigma2", VarKind::Scalar);
    let s3 = prob.add_var("sigma3", VarKind::Scalar);
    index.sigma = vec![s1, s2, s3];
    let slot = |p: &LmiProblem, v: VarId| Some(p.var(v).offset);

    for i in 0..big {
        index
            .p
            .push(prob.add_var(format!("P[{i}]"), VarKind::Symmetric { dim: n }));
    }
    let assembled = |i: usize, j: usize| !opts.swap_symmetry || i < j;
    let mult_kind = |p: usize| VarKind::Multiplier {
        dim: p,
        zero_diag: opts.zero_diagonal_multipliers,
    };
    for i in 0..big {
        for j in 0..big {
            if i == j || !assembled(i, j) {
                continue;
            }
            let p = s_procedure_rows(aug, i, j, opts.s_rows).nrows();
            let cell = CellVars {
                pbar: prob.add_var(
                    format!("Pbar[{i},{j}]"),
                    VarKind::Symmetric { dim: t.ncols() },
                ),
                u: prob.add_var(format!("U[{i},{j}]"), mult_kind(p)),
                r: prob.add_var(format!("R[{i},{j}]"), mult_kind(p)),
                w: prob.add_var(format!("W[{i},{j}]"), mult_kind(p)),
            };
            index.cells.insert((i, j), cell);
        }
    }
    let upper = |cell: (usize, usize)| !opts.swap_symmetry || cell.0 <= cell.1;
    for (k, f) in aug.facets.iter().enumerate() {
        if upper(f.from) && upper(f.to) {
            let v = prob.add_var(
                format!("L[{},{}|{},{}]", f.from.0, f.from.1, f.to.0, f.to.1),
                VarKind::Rectangular { rows: dim, cols: 1 },
            );
            index.facets.push(FacetSource::Own(v));
        } else {
            let mirror = aug
                .facets
                .iter()
                .position(|g| g.from == (f.from.1, f.from.0) && g.to == (f.to.1, f.to.0))
                .ok_or_else(|| Error::Assembly(format!("facet {k} has no mirror image")))?;
            index.facets.push(FacetSource::Mirror(mirror));
        }
    }

    // scalar bounds
    let sm = opts.sigma_min;
    prob.push_row(
        "sigma1>=min",
        RowKind::Geq,
        vec![(slot(&prob, s1), 1.0), (None, -sm)],
    );
    prob.push_row(
        "sigma3>=min",
        RowKind::Geq,
        vec![(slot(&prob, s3), 1.0), (None, -sm)],
    );
    prob.push_row(
        "sigma2>=sigma1",
        RowKind::Geq,
        vec![(slot(&prob, s2), 1.0), (slot(&prob, s1), -1.0)],
    );

    // diagonal cells
    for i in 0..big {
        let pi = index.p[i];
        let ai = &aug.pwa.cells[i].a;
        let lo = prob
            .expr(n, n)
            .var(pi, &eye_n, &eye_n, (0, 0), 1.0, false)
            .scalar(s1, &eye_n, (0, 0), -1.0)
            .build();
        prob.push_block(format!("lower[{i}]"), Sense::Psd, lo)?;
        let hi = prob
            .expr(n, n)
            .scalar(s2, &eye_n, (0, 0), 1.0)
            .var(pi, &eye_n, &eye_n, (0, 0), -1.0, false)
            .build();
        prob.push_block(format!("upper[{i}]"), Sense::Psd, hi)?;
        let size = if with_p { n + 1 } else { n };
        let mut e = prob
            .expr(size, size)
            .var(pi, &eye_n, ai, (0, 0), 1.0, true)
            .constant(0, 0, &(c.transpose() * c))
            .scalar(s3, &eye_n, (0, 0), 1.0);
        if with_p {
            e = e
                .var(pi, &eye_n, b, (0, n), 1.0, true)
                .constant(0, n, &(c.transpose() * d))
                .constant(n, 0, &(c * d))
                .constant(n, n, &Mat::from_element(1, 1, d * d - inv_eta2));
        }
        prob.push_block(format!("decrease[{i}]"), Sense::Nsd, e.build())?;
    }

    // off-diagonal cells
    let mut bx = Mat::zeros(dim, 1);
    put(&mut bx, 0, 0, b);
    let mut bb = bx.clone();
    put(&mut bb, n, 0, b);
    let cbar = &aug.c;
    let dbar = &aug.d;
    for (&(i, j), cell) in &index.cells {
        let m = s_procedure_rows(aug, i, j, opts.s_rows);
        let mt = m.transpose();
        let abar = &aug.cell(i, j).a;
        let lo = prob
            .expr(dim, dim)
            .var(cell.pbar, &t, &tt, (0, 0), 1.0, false)
            .scalar(s1, &jbar, (0, 0), -1.0)
            .var(cell.u, &mt, &m, (0, 0), -1.0, false)
            .build()
            .congruence(&z);
        prob.push_block(format!("lower[{i},{j}]"), Sense::Psd, lo)?;
        let hi = prob
            .expr(dim, dim)
            .scalar(s2, &jbar, (0, 0), 1.0)
            .var(cell.pbar, &t, &tt, (0, 0), -1.0, false)
            .var(cell.r, &mt, &m, (0, 0), -1.0, false)
            .build()
            .congruence(&z);
        prob.push_block(format!("upper[{i},{j}]"), Sense::Psd, hi)?;

        let core = expr_fn(|e| {
            e.var(cell.pbar, &t, &project(&tt, abar), (0, 0), 1.0, true)
                .constant(0, 0, &(cbar.transpose() * cbar))
                .scalar(s3, &jbar, (0, 0), 1.0)
                .var(cell.w, &mt, &m, (0, 0), 1.0, false)
        });
        let block = match (with_p, opts.delta_p) {
            (false, _) => core(prob.expr(dim, dim)).build().congruence(&z),
            (true, DeltaPWeighting::Incremental) => {
                // with p̄ = (Δp + p̃, p̃) the p̃ column must vanish identically:
                // P̄·col(B, B, 0) = 0, leaving a block in (x̄, Δp)
                let eq = prob
                    .expr(dim, 1)
                    .var(cell.pbar, &t, &project(&tt, &bb), (0, 0), 1.0, false)
                    .build()
                    .prune();
                prob.push_equalities(&format!("channel[{i},{j}]"), eq, false)?;
                let cd = cbar.transpose() * d;
                core(prob.expr(dim + 1, dim + 1))
                    .var(cell.pbar, &t, &project(&tt, &bx), (0, dim), 1.0, true)
                    .constant(0, dim, &cd)
                    .constant(dim, 0, &cd.transpose())
                    .constant(dim, dim, &Mat::from_element(1, 1, d * d - inv_eta2))
                    .build()
                    .congruence(&zp)
            }
            (true, DeltaPWeighting::Identity) => {
                let cd = cbar.transpose() * dbar;
                core(prob.expr(dim + 2, dim + 2))
                    .var(cell.pbar, &t, &project(&tt, &aug.b), (0, dim), 1.0, true)
                    .constant(0, dim, &cd)
                    .constant(dim, 0, &cd.transpose())
                    .constant(
                        dim,
                        dim,
                        &(dbar.transpose() * dbar - Mat::identity(2, 2) * inv_eta2),
                    )
                    .build()
                    .congruence(&zpp)
            }
        };
        prob.push_block(format!("decrease[{i},{j}]"), Sense::Nsd, block)?;

        for v in [cell.u, cell.r, cell.w] {
            let var = prob.var(v).clone();
            for e in 0..var.len() {
                prob.push_row(
                    format!("{}#{e}>=0", var.name),
                    RowKind::Geq,
                    vec![(Some(var.offset + e), 1.0)],
                );
            }
        }
    }

    // continuity across facets
    for (k, f) in aug.facets.iter().enumerate() {
        let FacetSource::Own(l) = index.facets[k] else {
            continue;
        };
        let side = side_fn(|e, cell, coef| {
            Ok(if cell.0 == cell.1 {
                e.var(
                    index.p[cell.0],
                    &lift,
                    &lift.transpose(),
                    (0, 0),
                    coef,
                    false,
                )
            } else {
                let cv = index.cells.get(&cell).ok_or_else(|| {
                    Error::Assembly(format!("facet {k} touches unassembled cell {cell:?}"))
                })?;
                e.var(cv.pbar, &t, &tt, (0, 0), coef, false)
            })
        });
        let e = prob.expr(dim, dim);
        let e = side(e, f.from, 1.0)?;
        let e = side(e, f.to, -1.0)?;
        let e = e.var(l, &eye_dim, &f.e, (0, 0), -1.0, true).build().prune();
        prob.push_equalities(
            &format!(
                "continuity[{},{}|{},{}]",
                f.from.0, f.from.1, f.to.0, f.to.1
            ),
            e,
            true,
        )?;
    }

    if opts.objective == Objective::SigmaGap {
        prob.objective = vec![(prob.var(s2).offset, 1.0), (prob.var(s1).offset, -1.0)];
    }
    prob.index = index;
    Ok(prob)
}

// Pin closure signatures to "any borrow of the problem in, same borrow out".
fn expr_fn<F: for<'a> Fn(Expr<'a>) -> Expr<'a>>(f: F) -> F {
    f
}

fn side_fn<F: for<'a> Fn(Expr<'a>, (usize, usize), f64) -> Result<Expr<'a>>>(f: F) -> F {
    f
}

/// The single-region instance: one common quadratic incremental Lyapunov
/// function for slopes in [center − radius, center + radius].
pub fn assemble_circle_criterion(
    sys: &LureSystem,
    center_slope: f64,
    radius_eta: f64,
    opts: &AssemblyOptions,
) -> Result<LmiProblem> {
    if !(radius_eta > 0.0 && radius_eta.is_finite()) || !center_slope.is_finite() {
        return Err(Error::Argument(format!(
            "need finite center and positive radius, got ({center_slope}, {radius_eta})"
        )));
    }
    let approx = PwaApproximation {
        breakpoints: vec![],
        slopes: vec![center_slope],
        intercepts: vec![0.0],
        eta: radius_eta,
    };
    let aug = augment(&to_pwa_lure(sys, &approx)?);
    assemble_pwq_lmis(&aug, radius_eta, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{swap_permutation, Vector};
    use crate::nonlin::{build_partition, Nonlinearity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cubic_plant(eta_ref: f64) -> AugmentedSystem {
        let sys = LureSystem::new(
            Mat::from_row_slice(2, 2, &[-1.0, 0.0, 3.0, -2.0]),
            Mat::from_row_slice(2, 1, &[1.0, 0.0]),
            Mat::from_row_slice(1, 2, &[0.0, 1.0]),
            Nonlinearity::cubic_saturation(),
        )
        .unwrap();
        let approx = build_partition(&sys.nl, eta_ref).unwrap();
        augment(&to_pwa_lure(&sys, &approx).unwrap())
    }

    fn random_point(p: &LmiProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..p.num_entries())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect()
    }

    #[test]
    fn lift_examples() {
        let jbar = lift_diagonal(&Mat::identity(2, 2));
        assert_eq!(jbar[(0, 2)], -1.0);
        assert_eq!(jbar[(4, 4)], 0.0);
        assert_eq!(lift_diagonal(&Mat::zeros(3, 3)), Mat::zeros(7, 7));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = Mat::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            let p = &a + a.transpose();
            let xb = Vector::from_fn(7, |_, _| rng.gen_range(-2.0..2.0));
            let dx = xb.rows(0, 3) - xb.rows(3, 3);
            let want = dx.dot(&(&p * &dx));
            assert!((xb.dot(&(lift_diagonal(&p) * &xb)) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn single_region_has_only_diagonal_family() {
        let aug = cubic_plant(6.0);
        assert_eq!(aug.regions, 1);
        let p = assemble_pwq_lmis(&aug, aug.eta, &AssemblyOptions::default()).unwrap();
        let c = p.census();
        assert_eq!(c.lmi_blocks, 3);
        assert_eq!(
            (c.p_vars, c.pbar_vars, c.multiplier_vars, c.coupling_vars),
            (1, 0, 0, 0)
        );
        assert_eq!(c.scalar_vars, 3);
        assert_eq!(c.free_entries, 3 + 3);
        assert_eq!(c.equality_rows, 0);
    }

    #[test]
    fn census_matches_closed_form() {
        let aug = cubic_plant(0.8);
        let (big, n) = (7usize, 2usize);
        let dim = 2 * n + 1;
        let opts = AssemblyOptions {
            swap_symmetry: false,
            facial_reduction: false,
            ..AssemblyOptions::default()
        };
        let p = assemble_pwq_lmis(&aug, aug.eta, &opts).unwrap();
        let c = p.census();
        let off = big * (big - 1);
        let facets = 2 * big * (big - 1);
        assert_eq!(c.p_vars, big);
        assert_eq!(c.pbar_vars, off);
        assert_eq!(c.multiplier_vars, 3 * off);
        assert_eq!(c.coupling_vars, facets);
        assert_eq!(c.lmi_blocks, 3 * big + 3 * off);
        // multiplier sizes: rows(Ḡ_ij) + 1, where edge regions contribute one row
        let rows = |k: usize| if k == 0 || k == big - 1 { 1 } else { 2 };
        let mut mult_entries = 0;
        for i in 0..big {
            for j in 0..big {
                if i != j {
                    let p = rows(i) + rows(j) + 1;
                    mult_entries += 3 * p * (p - 1) / 2;
                }
            }
        }
        let free =
            3 + big * n * (n + 1) / 2 + off * dim * (dim + 1) / 2 + mult_entries + facets * dim;
        assert_eq!(c.free_entries, free);
        assert_eq!(c.inequality_rows, 3 + mult_entries);
        assert_eq!(c.equality_rows, off * dim + facets * dim * (dim + 1) / 2);
    }

    #[test]
    fn reduction_bases_span_the_forced_face() {
        let aug = cubic_plant(0.8);
        let (t, z) = reduction_bases(&aug);
        // ker C + A·ker C is all of R² here, so P̄ reduces to a form in (Δx, 1)
        assert_eq!(t.ncols(), 3);
        assert_eq!(z.ncols(), 4);
        assert!((t.transpose() * &t - Mat::identity(3, 3)).amax() < 1e-12);
        for u in [[1.0, 0.0], [0.0, 1.0], [0.3, -2.0]] {
            let v = Vector::from_vec(vec![u[0], u[1], u[0], u[1], 0.0]);
            assert!((t.transpose() * &v).amax() < 1e-12);
        }
        let w = Vector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((z.transpose() * &w).amax() < 1e-12);
        // lift(P) lies on the face
        let lifted = lift_diagonal(&Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let back = &t * (t.transpose() * &lifted * &t) * t.transpose();
        assert!((back - lifted).amax() < 1e-12);
    }

    #[test]
    fn reduced_census() {
        let aug = cubic_plant(0.8);
        let (big, n) = (7usize, 2usize);
        let full = assemble_pwq_lmis(
            &aug,
            aug.eta,
            &AssemblyOptions {
                facial_reduction: false,
                ..AssemblyOptions::default()
            },
        )
        .unwrap();
        let reduced = assemble_pwq_lmis(&aug, aug.eta, &AssemblyOptions::default()).unwrap();
        let (cf, cr) = (full.census(), reduced.census());
        let half = big * (big - 1) / 2;
        let dim = 2 * n + 1;
        assert_eq!(
            cf.free_entries - cr.free_entries,
            half * (dim * (dim + 1) / 2 - 6)
        );
        assert_eq!(cr.lmi_blocks, cf.lmi_blocks);
        // CB = 0 puts col(B, B, 0) inside the face: the channel rows vanish
        assert!(reduced.rows.iter().all(|r| !r.name.starts_with("channel")));
        assert!(full.rows.iter().any(|r| r.name.starts_with("channel")));
        for b in reduced.blocks.iter().filter(|b| b.name.contains(',')) {
            let expected = if b.name.starts_with("decrease") { 5 } else { 4 };
            assert_eq!(b.dim, expected, "{}", b.name);
        }
    }

    #[test]
    fn swap_symmetry_halves_off_diagonal_variables() {
        let aug = cubic_plant(0.8);
        let full = assemble_pwq_lmis(
            &aug,
            aug.eta,
            &AssemblyOptions {
                swap_symmetry: false,
                ..AssemblyOptions::default()
            },
        )
        .unwrap()
        .census();
        let half = assemble_pwq_lmis(&aug, aug.eta, &AssemblyOptions::default())
            .unwrap()
            .census();
        assert_eq!(half.pbar_vars * 2, full.pbar_vars);
        assert_eq!(half.multiplier_vars * 2, full.multiplier_vars);
        assert_eq!(half.coupling_vars * 2, full.coupling_vars);
        assert_eq!(half.p_vars, full.p_vars);
    }

    #[test]
    fn blocks_are_exactly_symmetric() {
        let aug = cubic_plant(0.8);
        for delta_p in [DeltaPWeighting::Incremental, DeltaPWeighting::Identity] {
            let opts = AssemblyOptions {
                delta_p,
                ..AssemblyOptions::default()
            };
            let p = assemble_pwq_lmis(&aug, aug.eta, &opts).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let x = random_point(&p, &mut rng);
            for b in &p.blocks {
                let m = b.value(&x);
                assert_eq!(m, m.transpose(), "{}", b.name);
            }
        }
    }

    #[test]
    fn diagonal_decrease_block_matches_formula() {
        let aug = cubic_plant(0.8);
        let p = assemble_pwq_lmis(&aug, aug.eta, &AssemblyOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_point(&p, &mut rng);
        let s3 = x[p.var(p.index.sigma[2]).offset];
        let c = &aug.pwa.c;
        for i in 0..aug.regions {
            let pi = p.value(p.index.p[i], &x);
            let ai = &aug.pwa.cells[i].a;
            let want =
                ai.transpose() * &pi + &pi * ai + c.transpose() * c + Mat::identity(2, 2) * s3;
            let block = p
                .blocks
                .iter()
                .find(|b| b.name == format!("decrease[{i}]"))
                .unwrap();
            let got = block.value(&x);
            assert!((got.view((0, 0), (2, 2)) - &want).norm() < 1e-12);
            let pb = &pi * &aug.pwa.b;
            assert!((got.view((0, 2), (2, 1)) - pb).norm() < 1e-12);
            assert!((got[(2, 2)] + 1.0 / (0.75 * 0.75)).abs() < 1e-12);
        }
    }

    #[test]
    fn s_procedure_terms_nonnegative_inside_cells() {
        let aug = cubic_plant(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for cell in aug.cells.iter().filter(|c| c.i != c.j) {
            let m = s_procedure_rows(&aug, cell.i, cell.j, SProcedureRows::WithConstant);
            let p = m.nrows();
            let mut u = Mat::zeros(p, p);
            for a in 0..p {
                for b in a + 1..p {
                    let v = rng.gen_range(0.0..1.0);
                    u[(a, b)] = v;
                    u[(b, a)] = v;
                }
            }
            let (li, hi) = aug.pwa.cells[cell.i].interval;
            let (lj, hj) = aug.pwa.cells[cell.j].interval;
            for _ in 0..50 {
                let x = Vector::from_vec(vec![
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(li.max(-3.0)..hi.min(3.0)),
                ]);
                let xt = Vector::from_vec(vec![
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(lj.max(-3.0)..hj.min(3.0)),
                ]);
                let xb = aug.lift(&x, &xt);
                let g = &m * &xb;
                assert!(g.min() >= 0.0);
                assert!(g.dot(&(&u * &g)) >= 0.0);
            }
        }
    }

    #[test]
    fn swap_maps_cell_data_onto_mirror() {
        let aug = cubic_plant(0.8);
        let pi = swap_permutation(2);
        for cell in &aug.cells {
            let mirror = aug.cell(cell.j, cell.i);
            assert_eq!(&pi * &cell.a * &pi, mirror.a);
        }
        assert_eq!(&aug.c * &pi, -&aug.c);
    }

    #[test]
    fn circle_criterion_problem() {
        let sys = LureSystem::new(
            Mat::from_row_slice(2, 2, &[-1.0, 0.0, 3.0, -2.0]),
            Mat::from_row_slice(2, 1, &[1.0, 0.0]),
            Mat::from_row_slice(1, 2, &[0.0, 1.0]),
            Nonlinearity::cubic_saturation(),
        )
        .unwrap();
        let p = assemble_circle_criterion(&sys, 3.0, 3.0, &AssemblyOptions::default()).unwrap();
        let c = p.census();
        assert_eq!((c.p_vars, c.pbar_vars, c.lmi_blocks), (1, 0, 3));
        assert!(assemble_circle_criterion(&sys, 3.0, 0.0, &AssemblyOptions::default()).is_err());
    }

    #[test]
    fn rejects_bad_eta_and_missing_facets() {
        let mut aug = cubic_plant(0.8);
        assert!(assemble_pwq_lmis(&aug, -1.0, &AssemblyOptions::default()).is_err());
        aug.facets.pop();
        assert!(matches!(
            assemble_pwq_lmis(&aug, 0.75, &AssemblyOptions::default()),
            Err(Error::Assembly(_))
        ));
    }
}
