//! Rank and nonsingularity under positive semidefinite imaginary perturbations
//! of complex symmetric matrices.
//!
//! Every check here refuses inputs outside its hypotheses (complex
//! symmetric, PSD imaginary part). `rank_comparison` skips those checks so
//! the unsymmetric counterexample can be reproduced.

use itertools::Itertools;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::spectral::{self, DEFAULT_TOL_SYM};

/// Minimum eigenvalue `>= -TOL_PSD * ||.||_2` counts as PSD.
pub const TOL_PSD: f64 = 1e-10;
/// Exhaustive principal-submatrix search is attempted up to this dimension.
pub const EXHAUSTIVE_LIMIT: usize = 12;

fn require_symmetric(s: &CMatrix, what: &'static str) -> Result<()> {
    let asymmetry = linalg::complex_asymmetry(s);
    if asymmetry > DEFAULT_TOL_SYM {
        return Err(Error::NotSymmetric { what, asymmetry });
    }
    Ok(())
}

fn require_nonsingular(s: &CMatrix) -> Result<()> {
    let n = s.nrows();
    let rank = spectral::numerical_rank(s, spectral::default_rank_tol(n, n));
    if rank < n {
        return Err(Error::Singular { rank, n });
    }
    Ok(())
}

fn require_psd_imag(s: &CMatrix) -> Result<()> {
    if !linalg::is_psd(&linalg::imag_part(s), TOL_PSD) {
        return Err(Error::PreconditionViolated("Im(S) is not positive semidefinite".into()));
    }
    Ok(())
}

fn require_real_psd(e: &RMatrix, what: &'static str) -> Result<()> {
    let asymmetry = linalg::asymmetry(e);
    if asymmetry > DEFAULT_TOL_SYM {
        return Err(Error::NotSymmetric { what, asymmetry });
    }
    if !linalg::is_psd(e, TOL_PSD) {
        return Err(Error::PreconditionViolated(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

/// Definiteness flags `(Im(S) >= 0, Im(S^-1) <= 0)` for a nonsingular
/// complex symmetric `S`.
pub fn check_inverse_imag_duality(s: &CMatrix) -> Result<(bool, bool)> {
    require_symmetric(s, "S")?;
    require_nonsingular(s)?;
    let inv = linalg::complex_inverse(s).ok_or(Error::Singular {
        rank: s.nrows().saturating_sub(1),
        n: s.nrows(),
    })?;
    let im = linalg::imag_part(s);
    let im_inv = linalg::imag_part(&inv);
    Ok((linalg::is_psd(&im, TOL_PSD), linalg::is_psd(&(-im_inv), TOL_PSD)))
}

/// Nonsingularity of `S + i v v^T` for complex symmetric nonsingular `S`
/// with `Im(S) >= 0`.
pub fn rank_one_imag_update_nonsingular(s: &CMatrix, v: &[f64]) -> Result<bool> {
    if v.len() != s.nrows() {
        return Err(Error::DimensionMismatch(format!("vector of length {} for {}x{} S", v.len(), s.nrows(), s.ncols())));
    }
    let e = RMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j]);
    psd_imag_update_nonsingular(s, &e)
}

/// Nonsingularity of `S + i E` for complex symmetric nonsingular `S` with
/// `Im(S) >= 0` and real symmetric PSD `E`.
pub fn psd_imag_update_nonsingular(s: &CMatrix, e: &RMatrix) -> Result<bool> {
    require_symmetric(s, "S")?;
    require_nonsingular(s)?;
    require_psd_imag(s)?;
    linalg::check_same_dim(e, s.nrows(), "E")?;
    require_real_psd(e, "E")?;
    let n = s.nrows();
    let updated = imag_shift(s, e);
    Ok(spectral::numerical_rank(&updated, spectral::default_rank_tol(n, n)) == n)
}

fn imag_shift(s: &CMatrix, e: &RMatrix) -> CMatrix {
    CMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] + Complex64::new(0.0, e[(i, j)]))
}

/// Index set `alpha` (0-based, ascending) with `|alpha| = r` and `S[alpha]`
/// nonsingular.
///
/// Candidates come first from diagonal-pivoted elimination (largest Schur
/// complement diagonal at each step), then from exhaustive search when
/// `n <= EXHAUSTIVE_LIMIT`.
pub fn find_rank_principal_submatrix(s: &CMatrix, r: usize) -> Result<Vec<usize>> {
    find_rank_principal_submatrix_with_tol(s, r, spectral::default_rank_tol(s.nrows(), s.ncols()) * 1e3)
}

pub fn find_rank_principal_submatrix_with_tol(s: &CMatrix, r: usize, tol_rank: f64) -> Result<Vec<usize>> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch("S must be square".into()));
    }
    let rank = spectral::numerical_rank(s, tol_rank);
    if rank != r {
        return Err(Error::PreconditionViolated(format!("numerical rank is {rank}, not {r}")));
    }
    if r == 0 {
        return Ok(Vec::new());
    }
    let smax = linalg::singular_values(s)[0];
    let ok = |idx: &[usize]| {
        let sub = linalg::principal_submatrix(s, idx);
        let sv = linalg::singular_values(&sub);
        sv.last().is_some_and(|&lo| lo > tol_rank * smax)
    };

    if let Some(mut idx) = diagonal_pivot_order(s, r) {
        idx.sort_unstable();
        if ok(&idx) {
            return Ok(idx);
        }
    }
    if n <= EXHAUSTIVE_LIMIT {
        for idx in (0..n).combinations(r) {
            if ok(&idx) {
                return Ok(idx);
            }
        }
    }
    Err(Error::NotFound { r })
}

fn diagonal_pivot_order(s: &CMatrix, r: usize) -> Option<Vec<usize>> {
    let n = s.nrows();
    let mut work = s.clone();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut chosen = Vec::with_capacity(r);
    for _ in 0..r {
        let (pos, &p) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| work[(*a.1, *a.1)].norm().total_cmp(&work[(*b.1, *b.1)].norm()))?;
        let pivot = work[(p, p)];
        if pivot.norm() == 0.0 {
            return None;
        }
        remaining.swap_remove(pos);
        for &i in &remaining {
            let f = work[(i, p)] / pivot;
            for &j in &remaining {
                let delta = f * work[(p, j)];
                work[(i, j)] -= delta;
            }
        }
        chosen.push(p);
    }
    Some(chosen)
}

/// `A + iD` perturbed by `iE`, with `A` real symmetric and `D`, `E` real
/// symmetric PSD.
#[derive(Debug, Clone)]
pub struct PsdPerturbationInstance {
    a: RMatrix,
    d: RMatrix,
    e: RMatrix,
}

impl PsdPerturbationInstance {
    pub fn new(a: RMatrix, d: RMatrix, e: RMatrix) -> Result<Self> {
        let n = linalg::check_square(&a, "A")?;
        linalg::check_same_dim(&d, n, "D")?;
        linalg::check_same_dim(&e, n, "E")?;
        let asymmetry = linalg::asymmetry(&a);
        if asymmetry > DEFAULT_TOL_SYM {
            return Err(Error::NotSymmetric { what: "A", asymmetry });
        }
        require_real_psd(&d, "D")?;
        require_real_psd(&e, "E")?;
        Ok(Self { a, d, e })
    }

    pub fn a(&self) -> &RMatrix {
        &self.a
    }

    pub fn d(&self) -> &RMatrix {
        &self.d
    }

    pub fn e(&self) -> &RMatrix {
        &self.e
    }
}

/// The two ranks compared by the monotonicity statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankComparison {
    pub base: usize,
    pub perturbed: usize,
}

impl RankComparison {
    pub fn holds(&self) -> bool {
        self.base <= self.perturbed
    }
}

/// Tolerance shared by both sides of a rank comparison.
pub const TOL_RANK_COMPARE: f64 = 1e-9;

/// `rank(A + iD) <= rank(A + iD + iE)`.
pub fn rank_monotonicity_holds(inst: &PsdPerturbationInstance) -> bool {
    rank_comparison(&inst.a, &inst.d, &inst.e, TOL_RANK_COMPARE).holds()
}

/// Computes both ranks without checking symmetry or definiteness.
pub fn rank_comparison(a: &RMatrix, d: &RMatrix, e: &RMatrix, tol_rank: f64) -> RankComparison {
    let base = CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| Complex64::new(a[(i, j)], d[(i, j)]));
    let perturbed = imag_shift(&base, e);
    RankComparison {
        base: spectral::numerical_rank(&base, tol_rank),
        perturbed: spectral::numerical_rank(&perturbed, tol_rank),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn counterexample() -> CMatrix {
        let r2 = 2f64.sqrt();
        CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(r2, 0.0), c(-r2, 0.0), c(-1.0, 0.0)])
    }

    #[test]
    fn scalar_duality() {
        let s = CMatrix::from_element(1, 1, c(0.0, 1.0));
        assert_eq!(check_inverse_imag_duality(&s).unwrap(), (true, true));
        let s = CMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(check_inverse_imag_duality(&s).unwrap(), (true, true));
    }

    #[test]
    fn duality_detects_indefinite() {
        let s = CMatrix::from_row_slice(2, 2, &[c(1.0, -2.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(check_inverse_imag_duality(&s).unwrap(), (false, false));
        assert!(matches!(check_inverse_imag_duality(&CMatrix::zeros(2, 2)), Err(Error::Singular { .. })));
    }

    #[test]
    fn rank_one_examples() {
        let s = CMatrix::from_element(1, 1, c(1.0, 0.0));
        assert!(rank_one_imag_update_nonsingular(&s, &[1.0]).unwrap());
        let s = CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(rank_one_imag_update_nonsingular(&s, &[1.0, 1.0]).unwrap());
        let bad = CMatrix::from_row_slice(2, 2, &[c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            rank_one_imag_update_nonsingular(&bad, &[1.0, 0.0]),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn psd_update_refuses_unsymmetric_counterexample() {
        let s = counterexample();
        let e = RMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(psd_imag_update_nonsingular(&s, &e), Err(Error::NotSymmetric { .. })));
        let sym = CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(0.5, 0.0), c(0.5, 0.0), c(-1.0, 0.0)]);
        assert!(psd_imag_update_nonsingular(&sym, &RMatrix::zeros(2, 2)).unwrap());
    }

    #[test]
    fn counterexample_rank_drops_when_bypassed() {
        let s = counterexample();
        let a = linalg::real_part(&s);
        let d = linalg::imag_part(&s);
        let e = RMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let cmp = rank_comparison(&a, &d, &e, TOL_RANK_COMPARE);
        assert_eq!(cmp, RankComparison { base: 2, perturbed: 1 });
        assert!(!cmp.holds());
        assert!(matches!(PsdPerturbationInstance::new(a, d, e), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn principal_submatrix_search() {
        let s = linalg::to_complex(&RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(find_rank_principal_submatrix(&s, 1).unwrap(), vec![0]);

        let l1 = RMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 1.0, -0.5, -0.5, -0.5, 1.0]);
        let alpha = find_rank_principal_submatrix(&linalg::to_complex(&l1), 2).unwrap();
        assert_eq!(alpha.len(), 2);
        let sub = linalg::principal_submatrix(&l1, &alpha);
        assert!(sub.determinant().abs() > 0.5);

        let nil = linalg::to_complex(&RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert!(matches!(find_rank_principal_submatrix(&nil, 1), Err(Error::NotFound { r: 1 })));
    }

    #[test]
    fn monotonicity_trivial_instance() {
        let inst = PsdPerturbationInstance::new(RMatrix::zeros(3, 3), RMatrix::zeros(3, 3), RMatrix::identity(3, 3)).unwrap();
        assert!(rank_monotonicity_holds(&inst));
        assert_eq!(
            rank_comparison(inst.a(), inst.d(), inst.e(), TOL_RANK_COMPARE),
            RankComparison { base: 0, perturbed: 3 }
        );
    }
}
