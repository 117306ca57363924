//! Affine semidefinite feasibility problems over structured matrix variables.
//!
//! The decision vector x stacks the free entries of every variable. Each LMI
//! block is stored as the upper triangle of M(x) = M₀ + Σₖ xₖMₖ; each linear
//! row as aᵀx + c, constrained to = 0 or ≥ 0.
//!
//! # Text form
//!
//! ```text
//! lmi-problem 1
//! var <name> <kind> <rows> <cols> <offset> <len>
//! objective <k> <coef>               (one line per nonzero cost)
//! block <name> <psd|nsd> <dim> <nnz>
//! <row> <col> <k|-> <coef>           (upper triangle; '-' is the constant)
//! row <name> <eq|geq> <nnz>
//! <k|-> <coef>
//! ```
//!
//! `kind` is one of `scalar`, `symmetric`, `multiplier`, `multiplier-diag`,
//! `rectangular`. Coefficients are written in shortest round-trip form, so
//! parsing the text reproduces the problem exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig_extremes, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Scalar,
    Symmetric {
        dim: usize,
    },
    /// Symmetric, entrywise nonnegative; the diagonal is fixed at zero unless
    /// `zero_diag` is false.
    Multiplier {
        dim: usize,
        zero_diag: bool,
    },
    Rectangular {
        rows: usize,
        cols: usize,
    },
}

impl VarKind {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Scalar => (1, 1),
            VarKind::Symmetric { dim } | VarKind::Multiplier { dim, .. } => (dim, dim),
            VarKind::Rectangular { rows, cols } => (rows, cols),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            VarKind::Scalar => 1,
            VarKind::Symmetric { dim } => dim * (dim + 1) / 2,
            VarKind::Multiplier {
                dim,
                zero_diag: true,
            } => dim * dim.saturating_sub(1) / 2,
            VarKind::Multiplier {
                dim,
                zero_diag: false,
            } => dim * (dim + 1) / 2,
            VarKind::Rectangular { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Matrix positions of free entry `e`, in upper-triangle column-major order.
    fn position(&self, e: usize) -> (usize, usize) {
        match *self {
            VarKind::Scalar => (0, 0),
            VarKind::Symmetric { .. }
            | VarKind::Multiplier {
                zero_diag: false, ..
            } => upper_position(e, true),
            VarKind::Multiplier {
                zero_diag: true, ..
            } => upper_position(e, false),
            VarKind::Rectangular { rows, .. } => (e % rows, e / rows),
        }
    }

    fn symmetric(&self) -> bool {
        matches!(self, VarKind::Symmetric { .. } | VarKind::Multiplier { .. })
    }

    fn tag(&self) -> &'static str {
        match self {
            VarKind::Scalar => "scalar",
            VarKind::Symmetric { .. } => "symmetric",
            VarKind::Multiplier {
                zero_diag: true, ..
            } => "multiplier",
            VarKind::Multiplier {
                zero_diag: false, ..
            } => "multiplier-diag",
            VarKind::Rectangular { .. } => "rectangular",
        }
    }

    fn from_tag(tag: &str, rows: usize, cols: usize) -> Option<Self> {
        Some(match tag {
            "scalar" => VarKind::Scalar,
            "symmetric" => VarKind::Symmetric { dim: rows },
            "multiplier" => VarKind::Multiplier {
                dim: rows,
                zero_diag: true,
            },
            "multiplier-diag" => VarKind::Multiplier {
                dim: rows,
                zero_diag: false,
            },
            "rectangular" => VarKind::Rectangular { rows, cols },
            _ => return None,
        })
    }
}

fn upper_position(e: usize, with_diag: bool) -> (usize, usize) {
    // column c holds c + 1 (or c) entries
    let mut c = 0;
    let mut start = 0;
    loop {
        let count = if with_diag { c + 1 } else { c };
        if e < start + count {
            return (e - start, c);
        }
        start += count;
        c += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
}

impl Variable {
    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }

    /// Rebuilds the matrix value from the decision vector.
    pub fn value(&self, x: &[f64]) -> Mat {
        let (r, c) = self.kind.shape();
        let mut m = Mat::zeros(r, c);
        for e in 0..self.len() {
            let v = x[self.offset + e];
            let (i, j) = self.kind.position(e);
            m[(i, j)] = v;
            if self.kind.symmetric() {
                m[(j, i)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// M(x) ⪰ 0.
    Psd,
    /// M(x) ⪯ 0.
    Nsd,
}

/// Coefficient slot: `None` is the constant term.
pub type Slot = Option<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub name: String,
    pub sense: Sense,
    pub dim: usize,
    /// Upper-triangle entries (row ≤ col).
    pub entries: Vec<(usize, usize, Slot, f64)>,
}

impl LmiBlock {
    /// M(x) as a dense symmetric matrix.
    pub fn value(&self, x: &[f64]) -> Mat {
        let mut m = Mat::zeros(self.dim, self.dim);
        for &(r, c, slot, v) in &self.entries {
            let w = match slot {
                None => v,
                Some(k) => v * x[k],
            };
            m[(r, c)] += w;
            if r != c {
                m[(c, r)] += w;
            }
        }
        m
    }

    pub fn max_coefficient(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |a, e| a.max(e.3.abs()))
    }

    /// Amount by which the constraint is violated (≥ 0 means violated).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let (lo, hi) = sym_eig_extremes(&self.value(x));
        match self.sense {
            Sense::Psd => -lo,
            Sense::Nsd => hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Geq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub name: String,
    pub kind: RowKind,
    pub terms: Vec<(Slot, f64)>,
}

impl LinearRow {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(slot, v)| match slot {
                None => v,
                Some(k) => v * x[k],
            })
            .sum()
    }

    pub fn max_coefficient(&self) -> f64 {
        self.terms.iter().fold(0.0_f64, |a, t| a.max(t.1.abs()))
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.value(x);
        match self.kind {
            RowKind::Eq => v.abs(),
            RowKind::Geq => -v,
        }
    }
}

/// Worst violations at a point, each normalized by its constraint's largest coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProblemResiduals {
    pub lmi: f64,
    pub equality: f64,
    pub inequality: f64,
}

impl ProblemResiduals {
    pub fn max(&self) -> f64 {
        self.lmi.max(self.equality).max(self.inequality)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LmiProblem {
    pub vars: Vec<Variable>,
    pub blocks: Vec<LmiBlock>,
    pub rows: Vec<LinearRow>,
    /// Minimize Σ cₖxₖ.
    pub objective: Vec<(usize, f64)>,
    pub(crate) index: super::assemble::ProblemIndex,
}

impl LmiProblem {
    pub fn num_entries(&self) -> usize {
        self.vars.last().map_or(0, |v| v.offset + v.len())
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind) -> VarId {
        let offset = self.num_entries();
        self.vars.push(Variable {
            name: name.into(),
            kind,
            offset,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn value(&self, id: VarId, x: &[f64]) -> Mat {
        self.var(id).value(x)
    }

    pub fn expr(&self, rows: usize, cols: usize) -> Expr<'_> {
        Expr {
            problem: self,
            rows,
            cols,
            constant: Mat::zeros(rows, cols),
            terms: BTreeMap::new(),
        }
    }

    pub fn push_block(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        built: Built,
    ) -> Result<()> {
        if built.rows != built.cols {
            return Err(Error::Assembly("LMI block must be square".into()));
        }
        let entries = built.upper_entries()?;
        self.blocks.push(LmiBlock {
            name: name.into(),
            sense,
            dim: built.rows,
            entries,
        });
        Ok(())
    }

    /// Adds every entry of the expression (upper triangle when `symmetric`) as `= 0`.
    pub fn push_equalities(&mut self, name: &str, built: Built, symmetric: bool) -> Result<()> {
        for c in 0..built.cols {
            let top = if symmetric { c + 1 } else { built.rows };
            for r in 0..top {
                let mut terms = Vec::new();
                let k0 = built.constant[(r, c)];
                if k0 != 0.0 {
                    terms.push((None, k0));
                }
                for (&k, m) in &built.terms {
                    if m[(r, c)] != 0.0 {
                        terms.push((Some(k), m[(r, c)]));
                    }
                }
                if terms.is_empty() {
                    continue;
                }
                if symmetric {
                    for (k, m) in std::iter::once((usize::MAX, &built.constant))
                        .chain(built.terms.iter().map(|(k, m)| (*k, m)))
                    {
                        if m[(r, c)] != m[(c, r)] {
                            return Err(Error::Assembly(format!(
                                "asymmetric equality {name} in slot {k}"
                            )));
                        }
                    }
                }
                self.rows.push(LinearRow {
                    name: format!("{name}[{r},{c}]"),
                    kind: RowKind::Eq,
                    terms,
                });
            }
        }
        Ok(())
    }

    pub fn push_row(&mut self, name: impl Into<String>, kind: RowKind, terms: Vec<(Slot, f64)>) {
        self.rows.push(LinearRow {
            name: name.into(),
            kind,
            terms,
        });
    }

    pub fn residuals(&self, x: &[f64]) -> ProblemResiduals {
        let mut res = ProblemResiduals::default();
        for b in &self.blocks {
            let v = b.violation(x) / b.max_coefficient().max(1.0);
            res.lmi = res.lmi.max(v);
        }
        for r in &self.rows {
            let v = r.violation(x) / r.max_coefficient().max(1.0);
            match r.kind {
                RowKind::Eq => res.equality = res.equality.max(v),
                RowKind::Geq => res.inequality = res.inequality.max(v),
            }
        }
        res
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("lmi-problem 1\n");
        for v in &self.vars {
            let (r, c) = v.kind.shape();
            let _ = writeln!(
                s,
                "var {} {} {r} {c} {} {}",
                v.name,
                v.kind.tag(),
                v.offset,
                v.len()
            );
        }
        for (k, c) in &self.objective {
            let _ = writeln!(s, "objective {k} {c:?}");
        }
        let slot = |k: Slot| k.map_or("-".to_string(), |k| k.to_string());
        for b in &self.blocks {
            let sense = match b.sense {
                Sense::Psd => "psd",
                Sense::Nsd => "nsd",
            };
            let _ = writeln!(s, "block {} {sense} {} {}", b.name, b.dim, b.entries.len());
            for &(r, c, k, v) in &b.entries {
                let _ = writeln!(s, "{r} {c} {} {v:?}", slot(k));
            }
        }
        for row in &self.rows {
            let kind = match row.kind {
                RowKind::Eq => "eq",
                RowKind::Geq => "geq",
            };
            let _ = writeln!(s, "row {} {kind} {}", row.name, row.terms.len());
            for &(k, v) in &row.terms {
                let _ = writeln!(s, "{} {v:?}", slot(k));
            }
        }
        s
    }

    /// Parses the text form. Cell-index metadata is not part of the text, so
    /// the result can be solved but not turned into a certificate.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        match lines.next() {
            Some((_, "lmi-problem 1")) => {}
            Some((l, _)) => return Err(err(l, "expected header `lmi-problem 1`")),
            None => return Err(err(0, "empty input")),
        }
        let mut p = LmiProblem::default();
        let num = |l: usize, tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| err(l, "expected an unsigned integer"))
        };
        let float = |l: usize, tok: Option<&str>| -> Result<f64> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| err(l, "expected a number"))
        };
        let slot = |l: usize, tok: Option<&str>| -> Result<Slot> {
            match tok {
                Some("-") => Ok(None),
                t => num(l, t).map(Some),
            }
        };
        while let Some((l, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("var") => {
                    let name = tok
                        .next()
                        .ok_or_else(|| err(l, "missing name"))?
                        .to_string();
                    let tag = tok.next().ok_or_else(|| err(l, "missing kind"))?;
                    let rows = num(l, tok.next())?;
                    let cols = num(l, tok.next())?;
                    let kind = VarKind::from_tag(tag, rows, cols)
                        .ok_or_else(|| err(l, "unknown variable kind"))?;
                    let offset = num(l, tok.next())?;
                    let len = num(l, tok.next())?;
                    if offset != p.num_entries() || len != kind.len() {
                        return Err(err(l, "inconsistent variable offset or length"));
                    }
                    p.add_var(name, kind);
                }
                Some("objective") => {
                    let k = num(l, tok.next())?;
                    let c = float(l, tok.next())?;
                    p.objective.push((k, c));
                }
                Some("block") => {
                    let name = tok
                        .next()
                        .ok_or_else(|| err(l, "missing name"))?
                        .to_string();
                    let sense = match tok.next() {
                        Some("psd") => Sense::Psd,
                        Some("nsd") => Sense::Nsd,
                        _ => return Err(err(l, "sense must be psd or nsd")),
                    };
                    let dim = num(l, tok.next())?;
                    let nnz = num(l, tok.next())?;
                    let mut entries = Vec::with_capacity(nnz);
                    for _ in 0..nnz {
                        let (l, line) = lines.next().ok_or_else(|| err(l, "truncated block"))?;
                        let mut t = line.split_whitespace();
                        let r = num(l, t.next())?;
                        let c = num(l, t.next())?;
                        if r > c || c >= dim {
                            return Err(err(l, "entry outside the upper triangle"));
                        }
                        entries.push((r, c, slot(l, t.next())?, float(l, t.next())?));
                    }
                    p.blocks.push(LmiBlock {
                        name,
                        sense,
                        dim,
                        entries,
                    });
                }
                Some("row") => {
                    let name = tok
                        .next()
                        .ok_or_else(|| err(l, "missing name"))?
                        .to_string();
                    let kind = match tok.next() {
                        Some("eq") => RowKind::Eq,
                        Some("geq") => RowKind::Geq,
                        _ => return Err(err(l, "row kind must be eq or geq")),
                    };
                    let nnz = num(l, tok.next())?;
                    let mut terms = Vec::with_capacity(nnz);
                    for _ in 0..nnz {
                        let (l, line) = lines.next().ok_or_else(|| err(l, "truncated row"))?;
                        let mut t = line.split_whitespace();
                        terms.push((slot(l, t.next())?, float(l, t.next())?));
                    }
                    p.rows.push(LinearRow { name, kind, terms });
                }
                _ => return Err(err(l, "unknown record")),
            }
        }
        let n = p.num_entries();
        let bad_slot = p
            .blocks
            .iter()
            .flat_map(|b| b.entries.iter().map(|e| e.2))
            .chain(p.rows.iter().flat_map(|r| r.terms.iter().map(|t| t.0)))
            .chain(p.objective.iter().map(|o| Some(o.0)))
            .any(|s| matches!(s, Some(k) if k >= n));
        if bad_slot {
            return Err(err(0, "coefficient refers to a missing variable entry"));
        }
        Ok(p)
    }
}

/// Builder for an affine matrix expression in the problem variables.
pub struct Expr<'a> {
    problem: &'a LmiProblem,
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

/// A finished expression, detached from the problem borrow.
pub struct Built {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

impl<'a> Expr<'a> {
    /// Adds `m` with its top-left corner at (r0, c0).
    pub fn constant(mut self, r0: usize, c0: usize, m: &Mat) -> Self {
        let mut view = self.constant.view_mut((r0, c0), (m.nrows(), m.ncols()));
        view += m;
        self
    }

    /// Adds coef·left·V·right at (r0, c0); with `mirror`, also its transpose at (c0, r0).
    pub fn var(
        mut self,
        id: VarId,
        left: &Mat,
        right: &Mat,
        at: (usize, usize),
        coef: f64,
        mirror: bool,
    ) -> Self {
        let var = self.problem.var(id).clone();
        let (vr, vc) = var.kind.shape();
        debug_assert_eq!(left.ncols(), vr);
        debug_assert_eq!(right.nrows(), vc);
        let (h, w) = (left.nrows(), right.ncols());
        for e in 0..var.len() {
            let (i, j) = var.kind.position(e);
            let mut x = left.column(i) * right.row(j);
            if var.kind.symmetric() && i != j {
                x += left.column(j) * right.row(i);
            }
            x *= coef;
            let slot = self
                .terms
                .entry(var.offset + e)
                .or_insert_with(|| Mat::zeros(self.rows, self.cols));
            let mut view = slot.view_mut(at, (h, w));
            view += &x;
            if mirror {
                let mut view = slot.view_mut((at.1, at.0), (w, h));
                view += x.transpose();
            }
        }
        self
    }

    /// Adds coef·s·m at (r0, c0) for a scalar variable s.
    pub fn scalar(self, id: VarId, m: &Mat, at: (usize, usize), coef: f64) -> Self {
        let one = Mat::from_element(1, 1, 1.0);
        debug_assert_eq!(self.problem.var(id).kind, VarKind::Scalar);
        // s·m = m_col-expansion: use left = m as (h×1) per column
        let mut out = self;
        for c in 0..m.ncols() {
            let col = m.columns(c, 1).into_owned();
            out = out.var(id, &col, &one, (at.0, at.1 + c), coef, false);
        }
        out
    }

    pub fn build(self) -> Built {
        Built {
            rows: self.rows,
            cols: self.cols,
            constant: self.constant,
            terms: self.terms,
        }
    }
}

impl Built {
    /// Zᵀ·M·Z for the constant and every coefficient matrix; the block must be square.
    pub fn congruence(self, z: &Mat) -> Built {
        let map = |m: &Mat| {
            let x = z.transpose() * m * z;
            (&x + x.transpose()) * 0.5
        };
        Built {
            rows: z.ncols(),
            cols: z.ncols(),
            constant: map(&self.constant),
            terms: self.terms.iter().map(|(k, m)| (*k, map(m))).collect(),
        }
        .prune()
    }

    /// Zeroes rounding-level entries (below 1e-13 of the largest coefficient)
    /// left behind by basis changes, and drops slots that vanish entirely.
    pub fn prune(mut self) -> Built {
        let scale = self
            .terms
            .values()
            .chain(std::iter::once(&self.constant))
            .fold(0.0_f64, |a, m| a.max(m.amax()));
        let tol = 1e-13 * scale;
        let clean = |m: &mut Mat| {
            m.apply(|v| {
                if v.abs() <= tol {
                    *v = 0.0
                }
            })
        };
        clean(&mut self.constant);
        for m in self.terms.values_mut() {
            clean(m);
        }
        self.terms.retain(|_, m| m.iter().any(|v| *v != 0.0));
        self
    }

    fn upper_entries(&self) -> Result<Vec<(usize, usize, Slot, f64)>> {
        let mut out = Vec::new();
        let slots = std::iter::once((None, &self.constant))
            .chain(self.terms.iter().map(|(k, m)| (Some(*k), m)));
        for (slot, m) in slots {
            for c in 0..self.cols {
                for r in 0..self.rows {
                    if m[(r, c)] != m[(c, r)] {
                        return Err(Error::Assembly(format!(
                            "block coefficient for slot {slot:?} is not symmetric at ({r}, {c})"
                        )));
                    }
                    if r <= c && m[(r, c)] != 0.0 {
                        out.push((r, c, slot, m[(r, c)]));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_counts_and_positions() {
        assert_eq!(VarKind::Symmetric { dim: 5 }.len(), 15);
        assert_eq!(
            VarKind::Multiplier {
                dim: 4,
                zero_diag: true
            }
            .len(),
            6
        );
        assert_eq!(
            VarKind::Multiplier {
                dim: 4,
                zero_diag: false
            }
            .len(),
            10
        );
        assert_eq!(VarKind::Rectangular { rows: 5, cols: 1 }.len(), 5);
        let k = VarKind::Symmetric { dim: 3 };
        let pos: Vec<_> = (0..6).map(|e| k.position(e)).collect();
        assert_eq!(pos, vec![(0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)]);
        let k = VarKind::Multiplier {
            dim: 3,
            zero_diag: true,
        };
        let pos: Vec<_> = (0..3).map(|e| k.position(e)).collect();
        assert_eq!(pos, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn expression_matches_dense_evaluation() {
        let mut p = LmiProblem::default();
        let v = p.add_var("P", VarKind::Symmetric { dim: 2 });
        let s = p.add_var("s", VarKind::Scalar);
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, 0.5, -3.0]);
        let built = p
            .expr(2, 2)
            .var(v, &Mat::identity(2, 2), &a, (0, 0), 1.0, true)
            .scalar(s, &Mat::identity(2, 2), (0, 0), 1.0)
            .constant(0, 0, &Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]))
            .build();
        p.push_block("lyap", Sense::Nsd, built).unwrap();
        let x = [2.0, 0.3, 1.5, -0.7];
        let pm = p.value(v, &x);
        let want = a.transpose() * &pm + &pm * &a - Mat::identity(2, 2) * 0.7 + Mat::identity(2, 2);
        assert!((p.blocks[0].value(&x) - want).norm() < 1e-14);
    }

    #[test]
    fn asymmetric_block_is_rejected() {
        let mut p = LmiProblem::default();
        let v = p.add_var("P", VarKind::Symmetric { dim: 2 });
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let built = p
            .expr(2, 2)
            .var(v, &Mat::identity(2, 2), &a, (0, 0), 1.0, false)
            .build();
        assert!(p.push_block("bad", Sense::Psd, built).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut p = LmiProblem::default();
        let v = p.add_var("P", VarKind::Symmetric { dim: 2 });
        let u = p.add_var(
            "U",
            VarKind::Multiplier {
                dim: 3,
                zero_diag: true,
            },
        );
        let s = p.add_var("s", VarKind::Scalar);
        let built = p
            .expr(2, 2)
            .var(
                v,
                &Mat::identity(2, 2),
                &Mat::identity(2, 2),
                (0, 0),
                1.0,
                false,
            )
            .scalar(s, &Mat::identity(2, 2), (0, 0), -0.1)
            .build();
        p.push_block("b0", Sense::Psd, built).unwrap();
        let ub = p
            .expr(3, 3)
            .var(
                u,
                &Mat::identity(3, 3),
                &Mat::identity(3, 3),
                (0, 0),
                1.0 / 3.0,
                false,
            )
            .build();
        p.push_block("b1", Sense::Nsd, ub).unwrap();
        p.push_row("pos", RowKind::Geq, vec![(Some(4), 1.0), (None, -1e-6)]);
        p.objective.push((6, 1.0));
        let text = p.to_text();
        let q = LmiProblem::from_text(&text).unwrap();
        assert_eq!(q.to_text(), text);
        assert_eq!(q.vars, p.vars);
        assert_eq!(q.blocks, p.blocks);
        assert_eq!(q.rows, p.rows);
        assert!(LmiProblem::from_text("lmi-problem 2\n").is_err());
        assert!(LmiProblem::from_text(&text.replace("psd", "pd")).is_err());
    }

    #[test]
    fn residuals_detect_violation() {
        let mut p = LmiProblem::default();
        let v = p.add_var("P", VarKind::Symmetric { dim: 2 });
        let eye = Mat::identity(2, 2);
        let built = p
            .expr(2, 2)
            .var(v, &eye, &eye, (0, 0), 1.0, false)
            .constant(0, 0, &(-&eye))
            .build();
        p.push_block("P >= I", Sense::Psd, built).unwrap();
        assert!(p.residuals(&[2.0, 0.0, 2.0]).max() <= 0.0);
        assert!((p.residuals(&[0.5, 0.0, 2.0]).lmi - 0.5).abs() < 1e-12);
    }
}
