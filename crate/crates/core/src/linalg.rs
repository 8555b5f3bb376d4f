//! Small dense helpers shared by the analysis modules.
//!
//! Everything here is a thin layer over `nalgebra`: real/complex conversion,
//! symmetric definiteness tests, sorted singular values, null vectors and
//! multiset matching of eigenvalue lists.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(a: &RMatrix) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(a: &CMatrix) -> RMatrix {
    a.map(|z| z.re)
}

pub fn imag_part(a: &CMatrix) -> RMatrix {
    a.map(|z| z.im)
}

pub fn check_finite(a: &RMatrix) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn check_square(a: &RMatrix, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

pub fn check_same_dim(a: &RMatrix, n: usize, what: &str) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {n}x{n}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub fn max_abs(a: &RMatrix) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `max |A - A^T| / max |A|`, zero for the zero matrix.
pub fn asymmetry(a: &RMatrix) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let t = a.transpose();
    (a - t).iter().fold(0.0_f64, |m, x: &f64| m.max(x.abs())) / scale
}

/// Complex symmetry defect `max |S - S^T| / max |S|` (transpose, not adjoint).
pub fn complex_asymmetry(s: &CMatrix) -> f64 {
    let scale = s.iter().fold(0.0, |m: f64, z| m.max(z.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    let t = s.transpose();
    (s - t).iter().fold(0.0, |m: f64, z| m.max(z.norm())) / scale
}

pub fn symmetrize(a: &RMatrix) -> RMatrix {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &RMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn spectral_norm(a: &RMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub fn complex_spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Positive semidefinite to relative tolerance: `lambda_min >= -tol * ||A||_2`.
pub fn is_psd(a: &RMatrix, tol: f64) -> bool {
    let ev = sym_eigenvalues(a);
    let scale = ev.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    ev.first().is_none_or(|&lo| lo >= -tol * scale)
}

/// Positive definite with strict margin: `lambda_min > tol * ||A||_2`.
pub fn is_pd(a: &RMatrix, tol: f64) -> bool {
    let ev = sym_eigenvalues(a);
    let scale = ev.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    match ev.first() {
        Some(&lo) => scale > 0.0 && lo > tol * scale,
        None => false,
    }
}

/// Singular values, descending.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn real_singular_values(a: &RMatrix) -> Vec<f64> {
    singular_values(&to_complex(a))
}

/// Smallest singular value and its right singular vector (unit norm).
///
/// Wide matrices are padded with zero rows so that a full right basis exists.
pub fn null_vector(a: &CMatrix) -> (CVector, f64) {
    let basis = smallest_right_singular(a, 1);
    basis.into_iter().next().expect("matrix has at least one column")
}

/// The `k` smallest singular values with their right singular vectors,
/// ordered from smallest upwards.
pub fn smallest_right_singular(a: &CMatrix, k: usize) -> Vec<(CVector, f64)> {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    order
        .into_iter()
        .take(k.min(n))
        .map(|i| {
            let v: CVector = v_t.row(i).adjoint();
            (v, svd.singular_values[i])
        })
        .collect()
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(a: &RMatrix) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

pub fn inverse(a: &RMatrix) -> Option<RMatrix> {
    a.clone().try_inverse()
}

pub fn complex_inverse(a: &CMatrix) -> Option<CMatrix> {
    a.clone().try_inverse()
}

pub fn spectral_radius(eigs: &[Complex64]) -> f64 {
    eigs.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Greedy global matching of two eigenvalue multisets: repeatedly pair the
/// closest remaining elements. Returns the largest pairing distance, or
/// infinity when the lengths differ.
pub fn matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    match_pairs(a, b).iter().fold(0.0, |m, &(_, _, d)| m.max(d))
}

/// Pairs `(i, j, |a_i - b_j|)` from greedy global nearest matching.
pub fn match_pairs(a: &[Complex64], b: &[Complex64]) -> Vec<(usize, usize, f64)> {
    let mut cand: Vec<(usize, usize, f64)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cand.push((i, j, (x - y).norm()));
        }
    }
    cand.sort_by(|p, q| p.2.total_cmp(&q.2));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    for (i, j, d) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

/// True when every element of `sub` has a partner in `sup` within `tol`
/// (each element of `sup` used at most once).
pub fn is_submultiset(sub: &[Complex64], sup: &[Complex64], tol: f64) -> bool {
    if sub.len() > sup.len() {
        return false;
    }
    let pairs = match_pairs(sub, sup);
    pairs.len() == sub.len() && pairs.iter().all(|&(_, _, d)| d <= tol)
}

/// Principal submatrix `A[idx, idx]`.
pub fn principal_submatrix<T: nalgebra::Scalar + Copy>(a: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_are_descending() {
        let a = to_complex(&RMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]));
        assert_eq!(singular_values(&a), vec![5.0, 3.0, 1.0]);
    }

    #[test]
    fn null_vector_of_rank_one() {
        let a = to_complex(&RMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        let (v, s) = null_vector(&a);
        assert!(s < 1e-14);
        assert!((v[0] + v[1]).norm() < 1e-12);
    }

    #[test]
    fn wide_matrix_null_vector() {
        let a = to_complex(&RMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
        let (v, s) = null_vector(&a);
        assert!(s < 1e-14);
        assert!((a * v).norm() < 1e-12);
    }

    #[test]
    fn matching_handles_permutations() {
        let a = [c(1.0, 2.0), c(1.0, -2.0), c(-3.0, 0.0)];
        let b = [c(-3.0, 0.0), c(1.0, -2.0), c(1.0, 2.0 + 1e-9)];
        assert!(matching_distance(&a, &b) < 2e-9);
        assert!(matching_distance(&a, &b[..2]).is_infinite());
    }

    #[test]
    fn definiteness_checks() {
        let a = RMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(is_pd(&a, 1e-10));
        let b = RMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(is_psd(&b, 1e-10));
        assert!(!is_pd(&b, 1e-10));
        assert!(!is_psd(&(-b), 1e-10));
    }
}
