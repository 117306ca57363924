//! PWA Lur'e reformulation and the augmented pair system.
//!
//! Substituting φ = φ_PWA + ε into ẋ = Ax − Bφ(Cx) gives, on the slab
//! Xᵢ = {x : Cx ∈ Rᵢ}, the affine dynamics ẋ = Aᵢx + aᵢ − Bε(Cx) with
//! Aᵢ = A − rᵢBC and aᵢ = −sᵢB. Pairs (x, x̃) live in product cells
//! X_ij = Xᵢ × Xⱼ of the augmented state x̄ = col(x, x̃, 1).

use crate::error::{Error, Result};
use crate::linalg::{put, Mat, Vector};
use crate::nonlin::{evaluate_pwa, Nonlinearity, PwaApproximation};

/// Tolerance used to snap a point sitting numerically on a facet into a cell.
pub const CELL_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LureSystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub nl: Nonlinearity,
}

impl LureSystem {
    pub fn new(a: Mat, b: Mat, c: Mat, nl: Nonlinearity) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.shape() != (n, 1) {
            return Err(Error::Dimension(format!(
                "B must be {n}x1, got {:?}",
                b.shape()
            )));
        }
        if c.shape() != (1, n) {
            return Err(Error::Dimension(format!(
                "C must be 1x{n}, got {:?}",
                c.shape()
            )));
        }
        if [&a, &b, &c].iter().any(|m| !crate::linalg::is_finite(m)) {
            return Err(Error::Argument("system matrices must be finite".into()));
        }
        if c.iter().all(|v| *v == 0.0) {
            return Err(Error::Argument("C must be nonzero".into()));
        }
        Ok(LureSystem { a, b, c, nl })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn output(&self, x: &Vector) -> f64 {
        (&self.c * x)[0]
    }

    /// Ax − Bφ(Cx).
    pub fn vector_field(&self, x: &Vector) -> Vector {
        let p = -self.nl.eval(self.output(x));
        &self.a * x + self.b.column(0) * p
    }
}

#[derive(Debug, Clone)]
pub struct PwaCell {
    /// Aᵢ = A − rᵢBC.
    pub a: Mat,
    /// aᵢ = −sᵢB.
    pub offset: Vector,
    /// Cᵢ = C.
    pub c: Mat,
    /// cᵢ = 0.
    pub c_offset: f64,
    /// Gᵢx + gᵢ ⪰ 0 describes the cell.
    pub g: Mat,
    pub g_offset: Vector,
    /// Closed interval of Cx, with infinite outer ends.
    pub interval: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct PwaLureSystem {
    pub cells: Vec<PwaCell>,
    pub b: Mat,
    pub c: Mat,
    pub d: f64,
    pub approx: PwaApproximation,
}

impl PwaLureSystem {
    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn eta(&self) -> f64 {
        self.approx.eta
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.approx.breakpoints
    }

    pub fn cell_of(&self, x: &Vector) -> usize {
        self.approx.region_of((&self.c * x)[0])
    }

    /// Aᵢx + aᵢ − Bε(Cx) on the cell containing x.
    pub fn vector_field(&self, x: &Vector, nl: &Nonlinearity) -> Vector {
        let q = (&self.c * x)[0];
        let cell = &self.cells[self.approx.region_of(q)];
        let eps = nl.eval(q) - evaluate_pwa(&self.approx, q);
        &cell.a * x + &cell.offset - self.b.column(0) * eps
    }
}

pub fn to_pwa_lure(sys: &LureSystem, approx: &PwaApproximation) -> Result<PwaLureSystem> {
    approx.validate()?;
    let bc = &sys.b * &sys.c;
    let cells = (0..approx.regions())
        .map(|i| {
            let interval = approx.interval(i);
            let (g, g_offset) = cell_polyhedron(interval, &sys.c)?;
            Ok(PwaCell {
                a: &sys.a - &bc * approx.slopes[i],
                offset: sys.b.column(0) * (-approx.intercepts[i]),
                c: sys.c.clone(),
                c_offset: 0.0,
                g,
                g_offset,
                interval,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PwaLureSystem {
        cells,
        b: sys.b.clone(),
        c: sys.c.clone(),
        d: 0.0,
        approx: approx.clone(),
    })
}

/// Inequality description {x : Gx + g ⪰ 0} of the slab {x : Cx ∈ [q_l, q_u]}.
pub fn cell_polyhedron(interval: (f64, f64), c: &Mat) -> Result<(Mat, Vector)> {
    let (lo, hi) = interval;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Argument(format!("empty interval [{lo}, {hi}]")));
    }
    let n = c.ncols();
    let mut rows: Vec<Mat> = Vec::new();
    let mut offs = Vec::new();
    if lo.is_finite() {
        rows.push(c.clone());
        offs.push(-lo);
    }
    if hi.is_finite() {
        rows.push(-c);
        offs.push(hi);
    }
    let mut g = Mat::zeros(rows.len(), n);
    for (k, r) in rows.iter().enumerate() {
        put(&mut g, k, 0, r);
    }
    Ok((g, Vector::from_vec(offs)))
}

#[derive(Debug, Clone)]
pub struct AugmentedCell {
    pub i: usize,
    pub j: usize,
    /// [[Aᵢ, 0, aᵢ], [0, Aⱼ, aⱼ], [0, 0, 0]].
    pub a: Mat,
    /// [[Gᵢ, 0, gᵢ], [0, Gⱼ, gⱼ]].
    pub g: Mat,
}

/// Codimension-1 intersection of two augmented cells.
#[derive(Debug, Clone)]
pub struct Facet {
    pub from: (usize, usize),
    pub to: (usize, usize),
    /// Single row with Ē x̄ = 0 on the intersection; C-block has unit norm.
    pub e: Mat,
    pub boundary: f64,
}

#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub n: usize,
    pub regions: usize,
    /// Row-major over (i, j): index i·N + j.
    pub cells: Vec<AugmentedCell>,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub facets: Vec<Facet>,
    pub eta: f64,
    pub pwa: PwaLureSystem,
}

impl AugmentedSystem {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn cell(&self, i: usize, j: usize) -> &AugmentedCell {
        &self.cells[i * self.regions + j]
    }

    pub fn lift(&self, x: &Vector, x_tilde: &Vector) -> Vector {
        let n = self.n;
        let mut v = Vector::zeros(2 * n + 1);
        v.rows_mut(0, n).copy_from(x);
        v.rows_mut(n, n).copy_from(x_tilde);
        v[2 * n] = 1.0;
        v
    }

    /// Regions of x and x̃, snapping outputs within CELL_SNAP_TOL of a facet.
    pub fn locate(&self, x: &Vector, x_tilde: &Vector) -> Result<(usize, usize)> {
        let i = self.region_of(x)?;
        let j = self.region_of(x_tilde)?;
        Ok((i, j))
    }

    fn region_of(&self, x: &Vector) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "state of length {} for n = {}",
                x.len(),
                self.n
            )));
        }
        let q = (&self.pwa.c * x)[0];
        if !q.is_finite() {
            return Err(Error::NoCell(format!("non-finite output {q}")));
        }
        let i = self.pwa.approx.region_of(q);
        let cell = &self.pwa.cells[i];
        let slack = (&cell.g * x + &cell.g_offset).min();
        if cell.g.nrows() > 0 && slack < -CELL_SNAP_TOL * (1.0 + q.abs()) {
            return Err(Error::NoCell(format!("output {q} outside region {i}")));
        }
        Ok(i)
    }
}

pub fn augment(pwa: &PwaLureSystem) -> AugmentedSystem {
    let n = pwa.n();
    let big = pwa.cells.len();
    let dim = 2 * n + 1;
    let mut cells = Vec::with_capacity(big * big);
    for i in 0..big {
        for j in 0..big {
            let (ci, cj) = (&pwa.cells[i], &pwa.cells[j]);
            let mut a = Mat::zeros(dim, dim);
            put(&mut a, 0, 0, &ci.a);
            put(&mut a, n, n, &cj.a);
            a.view_mut((0, 2 * n), (n, 1)).copy_from(&ci.offset);
            a.view_mut((n, 2 * n), (n, 1)).copy_from(&cj.offset);
            let (ri, rj) = (ci.g.nrows(), cj.g.nrows());
            let mut g = Mat::zeros(ri + rj, dim);
            put(&mut g, 0, 0, &ci.g);
            put(&mut g, ri, n, &cj.g);
            g.view_mut((0, 2 * n), (ri, 1)).copy_from(&ci.g_offset);
            g.view_mut((ri, 2 * n), (rj, 1)).copy_from(&cj.g_offset);
            cells.push(AugmentedCell { i, j, a, g });
        }
    }
    let mut b = Mat::zeros(dim, 2);
    put(&mut b, 0, 0, &pwa.b);
    put(&mut b, n, 1, &pwa.b);
    let mut c = Mat::zeros(1, dim);
    put(&mut c, 0, 0, &pwa.c);
    put(&mut c, 0, n, &(-&pwa.c));
    let d = Mat::from_row_slice(1, 2, &[pwa.d, -pwa.d]);
    AugmentedSystem {
        n,
        regions: big,
        cells,
        b,
        c,
        d,
        facets: facet_adjacency(pwa),
        eta: pwa.eta(),
        pwa: pwa.clone(),
    }
}

/// All codimension-1 intersections of product cells, ordered by (i, j) and then
/// by direction (x̃ crossing before x crossing).
pub fn facet_adjacency(pwa: &PwaLureSystem) -> Vec<Facet> {
    let n = pwa.n();
    let big = pwa.cells.len();
    let bps = pwa.breakpoints();
    let norm = pwa.c.norm();
    let row = |block: usize, q: f64| {
        let mut e = Mat::zeros(1, 2 * n + 1);
        put(&mut e, 0, block * n, &(&pwa.c / norm));
        e[(0, 2 * n)] = -q / norm;
        e
    };
    let mut facets = Vec::new();
    for i in 0..big {
        for j in 0..big {
            if j + 1 < big {
                facets.push(Facet {
                    from: (i, j),
                    to: (i, j + 1),
                    e: row(1, bps[j]),
                    boundary: bps[j],
                });
            }
            if i + 1 < big {
                facets.push(Facet {
                    from: (i, j),
                    to: (i + 1, j),
                    e: row(0, bps[i]),
                    boundary: bps[i],
                });
            }
        }
    }
    facets
}
