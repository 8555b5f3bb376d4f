use num_complex::Complex64;
use serde::Serialize;

use super::{GridEquilibrium, PowerGridModel};
use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix};
use crate::spectral::{self, DEFAULT_TOL_AXIS};
use crate::stability::{self, Witness, DEFAULT_TOL_OBS};

pub const DEFAULT_D_REPAIR: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct LosslessCriterion {
    pub imaginary_pair_exists: bool,
    /// Unobservable modes of `(M^-1 L, M^-1 D)` other than the rotational zero mode.
    pub witnesses: Vec<Witness>,
    /// Nonzero Jacobian eigenvalues on the imaginary axis.
    pub axis_eigenvalues: Vec<Complex64>,
}

/// For a lossless network at an equilibrium in Omega, an imaginary pair
/// exists exactly when `(M^-1 L, M^-1 D)` has an unobservable nonzero mode.
/// The observability verdict is cross-checked against the spectrum.
pub fn lossless_imaginary_criterion(model: &PowerGridModel, eq: &GridEquilibrium) -> Result<LosslessCriterion> {
    if !model.is_lossless() {
        return Err(Error::NotLossless);
    }
    if !model.in_omega(&eq.delta0) {
        return Err(Error::NotInOmega);
    }
    let sys = model.to_second_order();
    let minv = sys.inertia_inv();
    let a = minv * sys.stiffness(&eq.delta0);
    let verdict = stability::observability_test(&a, &(minv * sys.damping()), DEFAULT_TOL_OBS)?;
    let zero_tol = 1e-8 * linalg::spectral_norm(&a).max(1.0);
    let witnesses: Vec<Witness> = verdict
        .witnesses
        .into_iter()
        .filter(|w| w.eigenvalue.norm() > zero_tol)
        .collect();
    let spectrum = sys.spectrum(&eq.delta0, DEFAULT_TOL_AXIS)?;
    let axis_eigenvalues = spectrum.nonzero_axis_set();
    let imaginary_pair_exists = !witnesses.is_empty();
    if imaginary_pair_exists == axis_eigenvalues.is_empty() {
        return Err(Error::TheoremViolation(format!(
            "{} unobservable nonzero modes but axis eigenvalues {:?}",
            witnesses.len(),
            axis_eigenvalues
        )));
    }
    Ok(LosslessCriterion {
        imaginary_pair_exists,
        witnesses,
        axis_eigenvalues,
    })
}

/// For every witness, the first generator carrying the mode that has no
/// damping yet. Indices are 0-based and deduplicated.
pub fn damping_repair_suggestion(model: &PowerGridModel, witnesses: &[Witness]) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::new();
    for w in witnesses {
        let scale = w.vector.norm().max(1e-300);
        let j = (0..model.n())
            .find(|&j| w.vector[j].norm() > DEFAULT_TOL_OBS * scale && model.damping[j] == 0.0)
            .ok_or(Error::NoRepairIndex)?;
        if !out.contains(&j) {
            out.push(j);
        }
    }
    Ok(out)
}

/// Copy of `model` with `d_j = d_repair` at each index.
pub fn apply_repair(model: &PowerGridModel, indices: &[usize], d_repair: f64) -> PowerGridModel {
    let mut m = model.clone();
    for &j in indices {
        m.damping[j] = d_repair;
    }
    m
}

/// `(n+1)`-dimensional `M = I`, `D = diag(0, 0, d_tail)`, `L` with unit
/// diagonal and off-diagonal `-1/n`. The Jacobian has `+-i sqrt(1 + 1/n)`.
pub fn build_nonhyperbolic_family(n: usize, d_tail: &[f64]) -> Result<(RMatrix, RMatrix, RMatrix)> {
    if n < 2 {
        return Err(Error::PreconditionViolated(format!("n must be at least 2, got {n}")));
    }
    if d_tail.len() != n - 1 {
        return Err(Error::DimensionMismatch(format!(
            "d_tail has length {}, expected {}",
            d_tail.len(),
            n - 1
        )));
    }
    let dim = n + 1;
    let m = RMatrix::identity(dim, dim);
    let mut d = RMatrix::zeros(dim, dim);
    for (i, &x) in d_tail.iter().enumerate() {
        d[(i + 2, i + 2)] = x;
    }
    let l = RMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { -1.0 / n as f64 });
    let beta = (1.0 + 1.0 / n as f64).sqrt();
    let eigs = linalg::eigenvalues(&spectral::jacobian_2n(&m, &d, &l)?);
    for target in [Complex64::new(0.0, beta), Complex64::new(0.0, -beta)] {
        let dist = eigs.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
        if dist > 1e-8 {
            return Err(Error::TheoremViolation(format!("expected eigenvalue {target}, nearest at {dist:.3e}")));
        }
    }
    Ok((m, d, l))
}

/// Spectrum-only part of the small-network check: no nonzero eigenvalue on
/// the imaginary axis. No hypotheses are checked.
pub fn small_n_spectrum_check(model: &PowerGridModel, eq: &GridEquilibrium) -> Result<bool> {
    let report = model.to_second_order().spectrum(&eq.delta0, DEFAULT_TOL_AXIS)?;
    Ok(report.nonzero_axis_set().is_empty())
}

/// Networks of two or three generators with exactly one undamped generator
/// and an equilibrium in Omega have no imaginary pair.
pub fn small_n_hyperbolicity_check(model: &PowerGridModel, eq: &GridEquilibrium) -> Result<bool> {
    let n = model.n();
    if !(2..=3).contains(&n) {
        return Err(Error::AssumptionViolated(format!("needs 2 or 3 generators, got {n}")));
    }
    let undamped = model.damping.iter().filter(|&&d| d == 0.0).count();
    if undamped != 1 {
        return Err(Error::AssumptionViolated(format!(
            "needs exactly one undamped generator, got {undamped}"
        )));
    }
    model.validate().map_err(|e| Error::AssumptionViolated(e.to_string()))?;
    if !model.in_omega(&eq.delta0) {
        return Err(Error::AssumptionViolated("equilibrium is outside Omega".into()));
    }
    let ok = small_n_spectrum_check(model, eq)?;
    if !ok {
        return Err(Error::TheoremViolation(
            "small network with one undamped generator has an imaginary pair".into(),
        ));
    }
    Ok(ok)
}
