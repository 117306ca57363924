//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// (M + Mᵀ)/2.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Smallest and largest eigenvalue of the symmetric part of `m`.
pub fn sym_eig_extremes(m: &Mat) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let lo = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Permutation matrix exchanging the x and x̃ blocks of x̄ = col(x, x̃, 1).
pub fn swap_permutation(n: usize) -> Mat {
    let dim = 2 * n + 1;
    let mut p = Mat::zeros(dim, dim);
    for k in 0..n {
        p[(k, n + k)] = 1.0;
        p[(n + k, k)] = 1.0;
    }
    p[(2 * n, 2 * n)] = 1.0;
    p
}

/// Writes `block` into `target` with its top-left corner at (row, col).
pub fn put(target: &mut Mat, row: usize, col: usize, block: &Mat) {
    target
        .view_mut((row, col), (block.nrows(), block.ncols()))
        .copy_from(block);
}

/// Stacks matrices with equal column counts on top of each other.
pub fn vstack(parts: &[&Mat]) -> Mat {
    let cols = parts.first().map_or(0, |p| p.ncols());
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        debug_assert_eq!(p.ncols(), cols);
        put(&mut out, r, 0, p);
        r += p.nrows();
    }
    out
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// True when every eigenvalue of `a` has strictly negative real part.
pub fn is_hurwitz(a: &Mat) -> bool {
    a.complex_eigenvalues().iter().all(|z| z.re < 0.0)
}

pub fn quad_form(m: &Mat, v: &Vector) -> f64 {
    v.dot(&(m * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_permutation_is_involution() {
        let p = swap_permutation(3);
        assert_eq!(&p * &p, Mat::identity(7, 7));
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 1.0]);
        let w = &p * &v;
        assert_eq!(w.as_slice(), &[4.0, 5.0, 6.0, 1.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn eig_extremes_diag() {
        let m = Mat::from_diagonal(&Vector::from_vec(vec![3.0, -1.0, 2.0]));
        let (lo, hi) = sym_eig_extremes(&m);
        assert!((lo + 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
    }

    #[test]
    fn hurwitz_check() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 3.0, -2.0]);
        assert!(is_hurwitz(&a));
        let b = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -2.0]);
        assert!(!is_hurwitz(&b));
    }
}
