//! Quadratic-pencil eigenanalysis and the dense kernels built on it.
//!
//! The Jacobian of `M x'' + D x' + f(x) = 0` at an equilibrium is the first
//! companion matrix `[[0, I], [-M^-1 L, -M^-1 D]]`; its eigenvalues are
//! exactly the values where `lambda^2 M + lambda D + L` drops rank.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix};

/// Default relative half-width of the band around the imaginary axis.
pub const DEFAULT_TOL_AXIS: f64 = 1e-7;
/// Relative symmetry tolerance used by the symmetric checks.
pub const DEFAULT_TOL_SYM: f64 = 1e-10;

/// `P(lambda) = lambda^2 * lead + lambda * linear + constant`.
#[derive(Debug, Clone)]
pub struct QuadraticPencil {
    lead: RMatrix,
    linear: RMatrix,
    constant: RMatrix,
}

impl QuadraticPencil {
    pub fn new(lead: RMatrix, linear: RMatrix, constant: RMatrix) -> Result<Self> {
        let n = linalg::check_square(&lead, "leading coefficient")?;
        linalg::check_same_dim(&linear, n, "linear coefficient")?;
        linalg::check_same_dim(&constant, n, "constant coefficient")?;
        for m in [&lead, &linear, &constant] {
            linalg::check_finite(m)?;
        }
        let rank = real_rank(&lead, default_rank_tol(n, n));
        if rank < n {
            return Err(Error::SingularLeadingCoefficient { rank, n });
        }
        Ok(Self {
            lead,
            linear,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.lead.nrows()
    }

    pub fn lead(&self) -> &RMatrix {
        &self.lead
    }

    pub fn linear(&self) -> &RMatrix {
        &self.linear
    }

    pub fn constant(&self) -> &RMatrix {
        &self.constant
    }

    pub fn evaluate(&self, lambda: Complex64) -> CMatrix {
        let l2 = lambda * lambda;
        CMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            l2 * self.lead[(i, j)] + lambda * self.linear[(i, j)] + self.constant[(i, j)]
        })
    }

    /// `sigma_min(P(lambda)) / (|lambda|^2 ||M2|| + |lambda| ||M1|| + ||M0||)`.
    pub fn relative_residual(&self, lambda: Complex64) -> f64 {
        let (_, smin) = linalg::null_vector(&self.evaluate(lambda));
        let a = lambda.norm();
        let scale = a * a * linalg::spectral_norm(&self.lead)
            + a * linalg::spectral_norm(&self.linear)
            + linalg::spectral_norm(&self.constant);
        if scale == 0.0 {
            smin
        } else {
            smin / scale
        }
    }

    /// First companion linearization `[[0, I], [-M2^-1 M0, -M2^-1 M1]]`.
    pub fn companion(&self) -> RMatrix {
        let inv = linalg::inverse(&self.lead).expect("leading coefficient checked nonsingular");
        block_companion(&(&inv * &self.constant), &(&inv * &self.linear))
    }
}

fn block_companion(stiff: &RMatrix, damp: &RMatrix) -> RMatrix {
    let n = stiff.nrows();
    let mut j = RMatrix::zeros(2 * n, 2 * n);
    j.view_mut((0, n), (n, n)).fill_with_identity();
    j.view_mut((n, 0), (n, n)).copy_from(&(-stiff));
    j.view_mut((n, n), (n, n)).copy_from(&(-damp));
    j
}

/// The `2n` eigenvalues of the pencil, from its companion linearization.
pub fn pencil_eigenvalues(p: &QuadraticPencil) -> Result<Vec<Complex64>> {
    Ok(linalg::eigenvalues(&p.companion()))
}

/// Jacobian `[[0, I], [-M^-1 L, -M^-1 D]]` of the first-order form.
pub fn jacobian_2n(m: &RMatrix, d: &RMatrix, l: &RMatrix) -> Result<RMatrix> {
    let n = linalg::check_square(m, "inertia")?;
    linalg::check_same_dim(d, n, "damping")?;
    linalg::check_same_dim(l, n, "stiffness")?;
    let rank = real_rank(m, default_rank_tol(n, n));
    if rank < n {
        return Err(Error::SingularInertia { rank, n });
    }
    let inv = linalg::inverse(m).ok_or(Error::SingularInertia { rank, n })?;
    Ok(block_companion(&(&inv * l), &(&inv * d)))
}

/// Half-plane partition of a spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvalues within the axis band (the imaginary-axis set).
    pub axis_set: Vec<Complex64>,
    pub left_count: usize,
    pub axis_count: usize,
    pub right_count: usize,
    pub tol_axis: f64,
    pub scale: f64,
}

impl SpectrumReport {
    pub fn inertia(&self) -> (usize, usize, usize) {
        (self.left_count, self.axis_count, self.right_count)
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.axis_count == 0
    }

    pub fn band(&self) -> f64 {
        self.tol_axis * self.scale
    }

    /// Axis eigenvalues other than those within the band of the origin.
    pub fn nonzero_axis_set(&self) -> Vec<Complex64> {
        let band = self.band();
        self.axis_set.iter().copied().filter(|z| z.norm() > band).collect()
    }
}

/// Partition by the sign of `Re(lambda)` with band `tol_axis * max(1, max|lambda|)`.
pub fn classify_spectrum(eigs: &[Complex64], tol_axis: f64) -> SpectrumReport {
    assert!(tol_axis > 0.0, "tol_axis must be positive");
    let scale = linalg::spectral_radius(eigs).max(1.0);
    let band = tol_axis * scale;
    let mut report = SpectrumReport {
        eigenvalues: eigs.to_vec(),
        axis_set: Vec::new(),
        left_count: 0,
        axis_count: 0,
        right_count: 0,
        tol_axis,
        scale,
    };
    for &z in eigs {
        if z.re < -band {
            report.left_count += 1;
        } else if z.re > band {
            report.right_count += 1;
        } else {
            report.axis_count += 1;
            report.axis_set.push(z);
        }
    }
    report
}

/// `max(rows, cols) * machine epsilon`.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Number of singular values above `tol_rank * sigma_max`.
pub fn numerical_rank(a: &CMatrix, tol_rank: f64) -> usize {
    let s = linalg::singular_values(a);
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol_rank * smax).count()
}

pub fn real_rank(a: &RMatrix, tol_rank: f64) -> usize {
    numerical_rank(&linalg::to_complex(a), tol_rank)
}

/// `S = U diag(sigma) U^T` with `U` unitary.
#[derive(Debug, Clone)]
pub struct TakagiFactorization {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
}

impl TakagiFactorization {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.sigma.len();
        let mut us = self.u.clone();
        for j in 0..n {
            let s = self.sigma[j];
            us.column_mut(j).scale_mut(s);
        }
        us * self.u.transpose()
    }
}

/// Autonne-Takagi factorization of a complex symmetric matrix.
///
/// Works on the real symmetric embedding `[[Re S, Im S], [Im S, -Re S]]`,
/// whose eigenvalues are `+-sigma_k`; an eigenvector `(x, y)` for `+sigma`
/// gives the Takagi vector `x + i y`. Columns for zero singular values are
/// completed to an orthonormal basis.
pub fn takagi(s: &CMatrix) -> Result<TakagiFactorization> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, s.ncols())));
    }
    let asym = linalg::complex_asymmetry(s);
    if asym > DEFAULT_TOL_SYM {
        return Err(Error::NotSymmetric {
            what: "Takagi input",
            asymmetry: asym,
        });
    }
    if n == 0 {
        return Ok(TakagiFactorization {
            u: CMatrix::zeros(0, 0),
            sigma: Vec::new(),
        });
    }
    let sym = (s + s.transpose()) * Complex64::new(0.5, 0.0);
    let a = linalg::real_part(&sym);
    let b = linalg::imag_part(&sym);
    let mut h = RMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a);
    h.view_mut((0, n), (n, n)).copy_from(&b);
    h.view_mut((n, 0), (n, n)).copy_from(&b);
    h.view_mut((n, n), (n, n)).copy_from(&(-&a));

    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let smax = eig.eigenvalues[order[0]].max(0.0);
    let zero_tol = 20.0 * (2 * n) as f64 * f64::EPSILON * smax;

    let mut cols: Vec<linalg::CVector> = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for &k in order.iter().take(n) {
        let val = eig.eigenvalues[k];
        if val <= zero_tol {
            break;
        }
        let v = eig.eigenvectors.column(k);
        cols.push(linalg::CVector::from_fn(n, |i, _| Complex64::new(v[i], v[i + n])));
        sigma.push(val);
    }
    let positive = cols.len();
    if positive < n {
        let complement = if positive == 0 {
            (0..n)
                .map(|i| {
                    let mut e = linalg::CVector::zeros(n);
                    e[i] = Complex64::new(1.0, 0.0);
                    e
                })
                .collect::<Vec<_>>()
        } else {
            let span = CMatrix::from_columns(&cols);
            linalg::smallest_right_singular(&span.adjoint(), n - positive)
                .into_iter()
                .map(|(v, _)| v)
                .collect()
        };
        for v in complement.into_iter().take(n - positive) {
            cols.push(v);
            sigma.push(0.0);
        }
    }
    Ok(TakagiFactorization {
        u: DMatrix::from_columns(&cols),
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn rm(n: usize, v: &[f64]) -> RMatrix {
        RMatrix::from_row_slice(n, n, v)
    }

    #[test]
    fn harmonic_oscillator_pencil() {
        let p = QuadraticPencil::new(rm(1, &[1.0]), rm(1, &[0.0]), rm(1, &[1.0])).unwrap();
        let mut e = pencil_eigenvalues(&p).unwrap();
        e.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((e[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((e[1] - c(0.0, 1.0)).norm() < 1e-14);
        for z in e {
            assert!(p.relative_residual(z) < 1e-12);
        }
    }

    #[test]
    fn singular_lead_is_rejected() {
        let err = QuadraticPencil::new(rm(2, &[1.0, 1.0, 1.0, 1.0]), RMatrix::zeros(2, 2), RMatrix::identity(2, 2));
        assert!(matches!(err, Err(Error::SingularLeadingCoefficient { rank: 1, n: 2 })));
    }

    #[test]
    fn jacobian_block_formula() {
        let j = jacobian_2n(&rm(1, &[1.0]), &rm(1, &[0.0]), &rm(1, &[1.0])).unwrap();
        assert_eq!(j, rm(2, &[0.0, 1.0, -1.0, 0.0]));
        let j = jacobian_2n(&rm(1, &[2.0]), &rm(1, &[4.0]), &rm(1, &[6.0])).unwrap();
        assert_eq!(j, rm(2, &[0.0, 1.0, -3.0, -2.0]));
        assert!(matches!(
            jacobian_2n(&rm(1, &[0.0]), &rm(1, &[1.0]), &rm(1, &[1.0])),
            Err(Error::SingularInertia { .. })
        ));
    }

    #[test]
    fn classify_examples() {
        let r = classify_spectrum(&[c(0.0, 1.0), c(0.0, -1.0)], 1e-9);
        assert_eq!(r.axis_count, 2);
        let r = classify_spectrum(&[c(-1.0, 0.0), c(-2.0, 3.0), c(-2.0, -3.0), c(0.0, 0.0)], 1e-9);
        assert_eq!(r.inertia(), (3, 1, 0));
        assert!(r.nonzero_axis_set().is_empty());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&linalg::to_complex(&RMatrix::identity(3, 3)), 1e-12), 3);
        assert_eq!(numerical_rank(&linalg::to_complex(&rm(2, &[1.0, 1.0, 1.0, 1.0])), 1e-12), 1);
        assert_eq!(numerical_rank(&CMatrix::zeros(3, 3), 1e-12), 0);
        let r2 = 2f64.sqrt();
        let s = CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(r2, 0.0), c(-r2, 0.0), c(-1.0, 0.0)]);
        let tol = default_rank_tol(2, 2);
        assert_eq!(numerical_rank(&s, tol), 2);
        let mut t = s.clone();
        t[(1, 1)] += c(0.0, 1.0);
        assert_eq!(numerical_rank(&t, tol), 1);
    }

    #[test]
    fn takagi_diagonal_and_antidiagonal() {
        let s = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let t = takagi(&s).unwrap();
        assert!((t.sigma[0] - 2.0).abs() < 1e-14 && (t.sigma[1] - 1.0).abs() < 1e-14);
        assert!((t.reconstruct() - &s).norm() < 1e-13);
        for k in 0..2 {
            assert!((t.u[(k, k)].norm() - 1.0).abs() < 1e-13);
        }

        let s = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let t = takagi(&s).unwrap();
        assert!((t.sigma[0] - 1.0).abs() < 1e-14 && (t.sigma[1] - 1.0).abs() < 1e-14);
        assert!((t.reconstruct() - &s).norm() < 1e-13);
    }

    #[test]
    fn takagi_rejects_unsymmetric() {
        let s = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(takagi(&s), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn takagi_rank_deficient() {
        // rank one: S = w w^T
        let w = linalg::CVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.0, 1.0)]);
        let s = &w * w.transpose();
        let t = takagi(&s).unwrap();
        assert!((t.reconstruct() - &s).norm() < 1e-12 * s.norm());
        let gram = t.u.adjoint() * &t.u;
        assert!((gram - CMatrix::identity(3, 3)).norm() < 1e-12);
        assert_eq!(t.sigma[1], 0.0);
    }
}
