use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use super::{GridEquilibrium, PowerGridModel};
use crate::bifurcation::{AnalysisModel, DampingPath, ReductionFn};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::{self, RMatrix};
use crate::spectral::{self, SpectrumReport, DEFAULT_TOL_AXIS};

/// Swing equations in angles relative to the last generator,
/// `psi_j = delta_j - delta_n`, state `(psi_1..psi_{n-1}, omega_1..omega_n)`.
#[derive(Debug, Clone)]
pub struct ReferencedModel {
    model: PowerGridModel,
    inertia_inv: RMatrix,
    damping: RMatrix,
}

impl ReferencedModel {
    pub fn new(model: &PowerGridModel) -> Self {
        Self {
            inertia_inv: RMatrix::from_diagonal(&model.inertia.map(|m| model.omega_s / m)),
            damping: model.damping_matrix(),
            model: model.clone(),
        }
    }

    /// Same network with a different (possibly non-diagonal) damping matrix.
    pub fn with_damping(mut self, damping: RMatrix) -> Self {
        self.damping = damping;
        self
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn damping(&self) -> &RMatrix {
        &self.damping
    }

    /// Referenced coordinates of the full equilibrium `(delta0, 0)`.
    pub fn state_of(delta0: &DVector<f64>) -> DVector<f64> {
        let n = delta0.len();
        let mut s = DVector::zeros(2 * n - 1);
        for j in 0..n - 1 {
            s[j] = delta0[j] - delta0[n - 1];
        }
        s
    }

    /// Full angles `(psi, 0)` and speeds from a referenced state.
    pub fn lift(state: &DVector<f64>, n: usize) -> (DVector<f64>, DVector<f64>) {
        let mut delta = DVector::zeros(n);
        delta.rows_mut(0, n - 1).copy_from(&state.rows(0, n - 1));
        (delta, state.rows(n - 1, n).into_owned())
    }
}

impl VectorField for ReferencedModel {
    fn dim(&self) -> usize {
        2 * self.n() - 1
    }

    fn eval(&self, s: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let (delta, omega) = Self::lift(s, n);
        let mut out = DVector::zeros(2 * n - 1);
        for j in 0..n - 1 {
            out[j] = omega[j] - omega[n - 1];
        }
        let acc = -(&self.inertia_inv * (&self.damping * &omega + self.model.flow(&delta) - &self.model.pm));
        out.rows_mut(n - 1, n).copy_from(&acc);
        out
    }

    fn jacobian(&self, s: &DVector<f64>) -> RMatrix {
        let n = self.n();
        let (delta, _) = Self::lift(s, n);
        let l = self.model.flow_jacobian(&delta);
        let mut j = RMatrix::zeros(2 * n - 1, 2 * n - 1);
        for i in 0..n - 1 {
            j[(i, n - 1 + i)] = 1.0;
            j[(i, 2 * n - 2)] = -1.0;
        }
        let coupling = -(&self.inertia_inv * l.columns(0, n - 1));
        j.view_mut((n - 1, 0), (n, n - 1)).copy_from(&coupling);
        j.view_mut((n - 1, n - 1), (n, n)).copy_from(&(-(&self.inertia_inv * &self.damping)));
        j
    }
}

/// Reduction hook so that sweeps over `model` run in referenced coordinates.
pub fn reduction_for(model: &PowerGridModel) -> ReductionFn {
    let base = ReferencedModel::new(model);
    Arc::new(move |sys, x0| {
        Ok(AnalysisModel {
            field: Box::new(base.clone().with_damping(sys.damping().clone())),
            state: ReferencedModel::state_of(x0),
        })
    })
}

impl PowerGridModel {
    /// Damping path `D(gamma) = diag(damping + gamma * damping_sensitivity) / omega_s`
    /// analysed on the referenced model.
    pub fn damping_path(&self, range: (f64, f64)) -> Result<DampingPath> {
        let s = self
            .damping_sensitivity
            .clone()
            .ok_or_else(|| Error::InvalidModel("model has no damping_sensitivity; cannot sweep gamma".into()))?;
        let base = self.to_second_order();
        let d0 = self.damping_matrix();
        let d1 = RMatrix::from_diagonal(&(s / self.omega_s));
        Ok(DampingPath::affine(base, d0, d1, range)?.with_reduction(reduction_for(self)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferencedSpectrumCheck {
    pub full: SpectrumReport,
    pub reduced: SpectrumReport,
    /// Largest matching distance between the reduced spectrum and the full
    /// spectrum with one eigenvalue nearest zero removed.
    pub mismatch: f64,
    pub inertia_full: (usize, usize, usize),
    pub inertia_reduced: (usize, usize, usize),
}

/// Compare the full `2n` and referenced `2n - 1` spectra at an equilibrium.
pub fn referenced_spectrum_check(model: &PowerGridModel, eq: &GridEquilibrium) -> Result<ReferencedSpectrumCheck> {
    let full_j = model.to_second_order().jacobian(&eq.delta0)?;
    let red = ReferencedModel::new(model);
    let red_j = red.jacobian(&ReferencedModel::state_of(&eq.delta0));
    let full_eigs = linalg::eigenvalues(&full_j);
    let red_eigs = linalg::eigenvalues(&red_j);
    let full = spectral::classify_spectrum(&full_eigs, DEFAULT_TOL_AXIS);
    let reduced = spectral::classify_spectrum(&red_eigs, DEFAULT_TOL_AXIS);

    let zero = (0..full_eigs.len())
        .min_by(|&a, &b| full_eigs[a].norm().total_cmp(&full_eigs[b].norm()))
        .expect("nonempty spectrum");
    let trimmed: Vec<Complex64> = full_eigs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != zero)
        .map(|(_, &z)| z)
        .collect();
    let mismatch = linalg::matching_distance(&trimmed, &red_eigs);
    let tol = 1e-7 * full.scale;
    let (fl, f0, fr) = full.inertia();
    let inertia_reduced = reduced.inertia();
    if mismatch > tol || f0 == 0 || inertia_reduced != (fl, f0 - 1, fr) {
        return Err(Error::TheoremViolation(format!(
            "referenced spectrum mismatch {mismatch:.3e}, inertia {:?} vs {:?}",
            full.inertia(),
            inertia_reduced
        )));
    }
    Ok(ReferencedSpectrumCheck {
        inertia_full: full.inertia(),
        inertia_reduced,
        full,
        reduced,
        mismatch,
    })
}
