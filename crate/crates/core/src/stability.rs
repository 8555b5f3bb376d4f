//! Observability, hyperbolicity and damping monotonicity for second-order
//! systems `M x'' + D x' + f(x) = 0`.
//!
//! The hyperbolicity and monotonicity checks compute their answer twice:
//! once from the structural criterion and once from the Jacobian spectrum.
//! A disagreement is returned as [`Error::TheoremViolation`] rather than
//! being resolved quietly, since it almost always means a tolerance problem.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::{self, CMatrix, CVector, RMatrix};
use crate::spectral::{self, SpectrumReport, DEFAULT_TOL_AXIS, DEFAULT_TOL_SYM};

pub const DEFAULT_TOL_OBS: f64 = 1e-8;
pub const DEFAULT_TOL_PD: f64 = 1e-10;
pub const DEFAULT_TOL_PSD: f64 = 1e-10;
/// Modes whose PBH margin is within this factor of the threshold are
/// reported as near misses.
pub const NEAR_MISS_FACTOR: f64 = 1e4;
/// Relative tolerance for matching axis sets between two systems.
pub const TOL_AXIS_MATCH: f64 = 1e-6;

pub type ForceFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ForceJacobianFn = Arc<dyn Fn(&DVector<f64>) -> RMatrix + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymmetryProfile {
    pub inertia_symmetric: bool,
    pub inertia_pd: bool,
    pub damping_symmetric_psd: bool,
    pub stiffness_symmetric: bool,
    pub stiffness_pd: bool,
}

/// `M x'' + D x' + f(x) = 0` with its force Jacobian.
#[derive(Clone)]
pub struct SecondOrderSystem {
    inertia: RMatrix,
    inertia_inv: RMatrix,
    damping: RMatrix,
    force: ForceFn,
    force_jacobian: ForceJacobianFn,
}

impl fmt::Debug for SecondOrderSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderSystem")
            .field("n", &self.n())
            .field("inertia", &self.inertia)
            .field("damping", &self.damping)
            .finish_non_exhaustive()
    }
}

impl SecondOrderSystem {
    pub fn new(inertia: RMatrix, damping: RMatrix, force: ForceFn, force_jacobian: ForceJacobianFn) -> Result<Self> {
        let n = linalg::check_square(&inertia, "inertia")?;
        if n == 0 {
            return Err(Error::DimensionMismatch("system dimension must be positive".into()));
        }
        linalg::check_same_dim(&damping, n, "damping")?;
        linalg::check_finite(&inertia)?;
        linalg::check_finite(&damping)?;
        let rank = spectral::real_rank(&inertia, spectral::default_rank_tol(n, n));
        if rank < n {
            return Err(Error::SingularInertia { rank, n });
        }
        let inertia_inv = linalg::inverse(&inertia).ok_or(Error::SingularInertia { rank, n })?;
        Ok(Self {
            inertia,
            inertia_inv,
            damping,
            force,
            force_jacobian,
        })
    }

    /// Linear force `f(x) = L x`.
    pub fn linear(inertia: RMatrix, damping: RMatrix, stiffness: RMatrix) -> Result<Self> {
        let n = inertia.nrows();
        linalg::check_same_dim(&stiffness, n, "stiffness")?;
        linalg::check_finite(&stiffness)?;
        let l1 = stiffness.clone();
        let force: ForceFn = Arc::new(move |x| &l1 * x);
        let jac: ForceJacobianFn = Arc::new(move |_| stiffness.clone());
        Self::new(inertia, damping, force, jac)
    }

    pub fn n(&self) -> usize {
        self.inertia.nrows()
    }

    pub fn inertia(&self) -> &RMatrix {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &RMatrix {
        &self.inertia_inv
    }

    pub fn damping(&self) -> &RMatrix {
        &self.damping
    }

    pub fn force(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.force)(x)
    }

    pub fn stiffness(&self, x: &DVector<f64>) -> RMatrix {
        (self.force_jacobian)(x)
    }

    /// Same inertia and force with a different damping matrix.
    pub fn with_damping(&self, damping: RMatrix) -> Result<Self> {
        linalg::check_same_dim(&damping, self.n(), "damping")?;
        linalg::check_finite(&damping)?;
        Ok(Self {
            damping,
            ..self.clone()
        })
    }

    /// The `2n x 2n` Jacobian of the first-order form at `(x0, 0)`.
    pub fn jacobian(&self, x0: &DVector<f64>) -> Result<RMatrix> {
        spectral::jacobian_2n(&self.inertia, &self.damping, &self.stiffness(x0))
    }

    pub fn spectrum(&self, x0: &DVector<f64>, tol_axis: f64) -> Result<SpectrumReport> {
        let j = self.jacobian(x0)?;
        Ok(spectral::classify_spectrum(&linalg::eigenvalues(&j), tol_axis))
    }

    pub fn symmetry_profile(&self, x0: &DVector<f64>) -> SymmetryProfile {
        let l = self.stiffness(x0);
        let inertia_symmetric = linalg::asymmetry(&self.inertia) <= DEFAULT_TOL_SYM;
        let stiffness_symmetric = linalg::asymmetry(&l) <= DEFAULT_TOL_SYM;
        SymmetryProfile {
            inertia_symmetric,
            inertia_pd: inertia_symmetric && linalg::is_pd(&self.inertia, DEFAULT_TOL_PD),
            damping_symmetric_psd: linalg::asymmetry(&self.damping) <= DEFAULT_TOL_SYM
                && linalg::is_psd(&self.damping, DEFAULT_TOL_PSD),
            stiffness_symmetric,
            stiffness_pd: stiffness_symmetric && linalg::is_pd(&l, DEFAULT_TOL_PD),
        }
    }

    /// First-order form on the state `(x, x')`.
    pub fn first_order(&self) -> FirstOrderForm {
        FirstOrderForm { system: self.clone() }
    }
}

/// `(x, v)' = (v, -M^-1 (D v + f(x)))`.
#[derive(Debug, Clone)]
pub struct FirstOrderForm {
    system: SecondOrderSystem,
}

impl VectorField for FirstOrderForm {
    fn dim(&self) -> usize {
        2 * self.system.n()
    }

    fn eval(&self, s: &DVector<f64>) -> DVector<f64> {
        let n = self.system.n();
        let x = s.rows(0, n).into_owned();
        let v = s.rows(n, n).into_owned();
        let acc = -(&self.system.inertia_inv * (&self.system.damping * &v + self.system.force(&x)));
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&acc);
        out
    }

    fn jacobian(&self, s: &DVector<f64>) -> RMatrix {
        let n = self.system.n();
        let x = s.rows(0, n).into_owned();
        spectral::jacobian_2n(&self.system.inertia, &self.system.damping, &self.system.stiffness(&x))
            .expect("inertia checked at construction")
    }
}

/// One mode of `A` and how strongly `B` sees it.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub eigenvalue: Complex64,
    /// Unit vector in the eigenspace minimizing the stacked PBH residual.
    pub vector: CVector,
    /// `||B v||`.
    pub residual: f64,
    /// Smallest singular value of `[A - lambda I; B]` for this direction.
    pub pbh_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityVerdict {
    pub observable: bool,
    /// Unobservable modes, one per null direction of the stacked matrix.
    pub witnesses: Vec<Witness>,
    /// Observable modes whose margin is within `NEAR_MISS_FACTOR` of the threshold.
    pub near_misses: Vec<Witness>,
    pub threshold: f64,
}

/// Group eigenvalues lying within `tol` of each other; returns (mean, multiplicity).
fn cluster_eigenvalues(eigs: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut used = vec![false; eigs.len()];
    let mut out = Vec::new();
    for i in 0..eigs.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![eigs[i]];
        // Grow transitively so chains of nearby values land in one cluster.
        let mut k = 0;
        while k < members.len() {
            let z = members[k];
            for j in 0..eigs.len() {
                if !used[j] && (eigs[j] - z).norm() <= tol {
                    used[j] = true;
                    members.push(eigs[j]);
                }
            }
            k += 1;
        }
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        out.push((mean, members.len()));
    }
    out
}

/// PBH test: a mode with eigenvalue `lambda` is unobservable when
/// `[A - lambda I; B]` loses rank. Repeated eigenvalues are searched over the
/// whole eigenspace.
pub fn observability_test(a: &RMatrix, b: &RMatrix, tol_obs: f64) -> Result<ObservabilityVerdict> {
    let m = linalg::check_square(a, "A")?;
    if b.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "B has {} columns, A is {m}x{m}",
            b.ncols()
        )));
    }
    linalg::check_finite(a)?;
    linalg::check_finite(b)?;
    let scale = linalg::spectral_norm(a).max(linalg::spectral_norm(b));
    let threshold = tol_obs * if scale > 0.0 { scale } else { 1.0 };
    let eigs = linalg::eigenvalues(a);
    let cluster_tol = 1e-6 * linalg::spectral_radius(&eigs).max(1.0);
    let ac = linalg::to_complex(a);
    let bc = linalg::to_complex(b);
    let rows = m + b.nrows();

    let mut witnesses = Vec::new();
    let mut near_misses = Vec::new();
    for (lambda, mult) in cluster_eigenvalues(&eigs, cluster_tol) {
        let mut stacked = CMatrix::zeros(rows, m);
        let mut shifted = ac.clone();
        for i in 0..m {
            shifted[(i, i)] -= lambda;
        }
        stacked.view_mut((0, 0), (m, m)).copy_from(&shifted);
        stacked.view_mut((m, 0), (b.nrows(), m)).copy_from(&bc);
        for (v, sigma) in linalg::smallest_right_singular(&stacked, mult) {
            let w = Witness {
                eigenvalue: lambda,
                residual: (&bc * &v).norm(),
                vector: v,
                pbh_margin: sigma,
            };
            if sigma <= threshold {
                witnesses.push(w);
            } else if sigma <= NEAR_MISS_FACTOR * threshold {
                near_misses.push(w);
            }
        }
    }
    Ok(ObservabilityVerdict {
        observable: witnesses.is_empty(),
        witnesses,
        near_misses,
        threshold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityVerdict {
    /// From the Jacobian spectrum.
    pub hyperbolic: bool,
    /// From the observability of `(M^-1 L, M^-1 D)`.
    pub via_observability: bool,
    pub axis_eigs: Vec<Complex64>,
    pub observability: ObservabilityVerdict,
    pub spectrum: SpectrumReport,
}

fn require_symmetric_pd(a: &RMatrix, what: &str) -> Result<()> {
    let asym = linalg::asymmetry(a);
    if asym > DEFAULT_TOL_SYM {
        return Err(Error::AssumptionViolated(format!(
            "{what} is not symmetric (relative asymmetry {asym:.3e})"
        )));
    }
    if !linalg::is_pd(a, DEFAULT_TOL_PD) {
        return Err(Error::AssumptionViolated(format!("{what} is not positive definite")));
    }
    Ok(())
}

fn require_symmetric_psd(a: &RMatrix, what: &str) -> Result<()> {
    let asym = linalg::asymmetry(a);
    if asym > DEFAULT_TOL_SYM {
        return Err(Error::AssumptionViolated(format!(
            "{what} is not symmetric (relative asymmetry {asym:.3e})"
        )));
    }
    if !linalg::is_psd(a, DEFAULT_TOL_PSD) {
        return Err(Error::AssumptionViolated(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

/// Hyperbolicity of `(x0, 0)` for symmetric `M > 0`, `D >= 0`, `L > 0`,
/// decided both by observability and by the spectrum.
pub fn hyperbolicity_symmetric(sys: &SecondOrderSystem, x0: &DVector<f64>) -> Result<HyperbolicityVerdict> {
    hyperbolicity_symmetric_with_tol(sys, x0, DEFAULT_TOL_OBS, DEFAULT_TOL_AXIS)
}

pub fn hyperbolicity_symmetric_with_tol(
    sys: &SecondOrderSystem,
    x0: &DVector<f64>,
    tol_obs: f64,
    tol_axis: f64,
) -> Result<HyperbolicityVerdict> {
    let l = sys.stiffness(x0);
    require_symmetric_pd(sys.inertia(), "inertia M")?;
    require_symmetric_psd(sys.damping(), "damping D")?;
    require_symmetric_pd(&l, "stiffness L")?;

    let minv = sys.inertia_inv();
    let observability = observability_test(&(minv * &l), &(minv * sys.damping()), tol_obs)?;
    let spectrum = sys.spectrum(x0, tol_axis)?;
    let hyperbolic = spectrum.is_hyperbolic();
    if hyperbolic != observability.observable {
        return Err(Error::TheoremViolation(format!(
            "observability says {}, spectrum has {} axis eigenvalues {:?}; witnesses {:?}",
            if observability.observable { "observable" } else { "unobservable" },
            spectrum.axis_count,
            spectrum.axis_set,
            observability
                .witnesses
                .iter()
                .map(|w| (w.eigenvalue, w.pbh_margin))
                .collect::<Vec<_>>()
        )));
    }
    Ok(HyperbolicityVerdict {
        hyperbolic,
        via_observability: observability.observable,
        axis_eigs: spectrum.axis_set.clone(),
        observability,
        spectrum,
    })
}

/// A purely imaginary pair `+-i omega` certified by a real positive
/// eigenvalue `mu = omega^2` of `M^-1 L` whose eigenvector `M^-1 D` annihilates.
#[derive(Debug, Clone, Serialize)]
pub struct ImaginaryPair {
    pub mu: f64,
    pub omega: f64,
    pub eigenvector: CVector,
    pub residual: f64,
}

/// Sufficient test for an imaginary pair without symmetry. `None` means no
/// witness was found, which does not imply hyperbolicity.
pub fn imaginary_pair_sufficient_unsymmetric(
    m: &RMatrix,
    d: &RMatrix,
    l: &RMatrix,
) -> Result<Option<ImaginaryPair>> {
    imaginary_pair_sufficient_unsymmetric_with_tol(m, d, l, DEFAULT_TOL_OBS)
}

pub fn imaginary_pair_sufficient_unsymmetric_with_tol(
    m: &RMatrix,
    d: &RMatrix,
    l: &RMatrix,
    tol_obs: f64,
) -> Result<Option<ImaginaryPair>> {
    let j = spectral::jacobian_2n(m, d, l)?;
    let minv = linalg::inverse(m).expect("checked by jacobian_2n");
    let a = &minv * l;
    let b = &minv * d;
    let verdict = observability_test(&a, &b, tol_obs)?;
    let imag_tol = 1e-9 * linalg::spectral_norm(&a).max(1.0);
    let Some(w) = verdict
        .witnesses
        .into_iter()
        .filter(|w| w.eigenvalue.im.abs() <= imag_tol && w.eigenvalue.re > imag_tol)
        .min_by(|x, y| x.pbh_margin.total_cmp(&y.pbh_margin))
    else {
        return Ok(None);
    };
    let mu = w.eigenvalue.re;
    let omega = mu.sqrt();
    let eigs = linalg::eigenvalues(&j);
    let tol = 1e-6 * linalg::spectral_radius(&eigs).max(1.0);
    for target in [Complex64::new(0.0, omega), Complex64::new(0.0, -omega)] {
        let dist = eigs.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
        if dist > tol {
            return Err(Error::TheoremViolation(format!(
                "witness predicts {target} but nearest Jacobian eigenvalue is {dist:.3e} away"
            )));
        }
    }
    Ok(Some(ImaginaryPair {
        mu,
        omega,
        eigenvector: w.vector,
        residual: w.residual,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    /// `D_II - D_I` is positive semidefinite.
    pub dpsd: bool,
    pub c_i: Vec<Complex64>,
    pub c_ii: Vec<Complex64>,
    pub subset_holds: bool,
    pub assumptions_checked: bool,
}

fn same_matrix(a: &RMatrix, b: &RMatrix) -> bool {
    let scale = linalg::max_abs(a).max(linalg::max_abs(b)).max(1.0);
    a.shape() == b.shape() && linalg::max_abs(&(a - b)) <= 1e-12 * scale
}

/// Every element of `sub` has a partner in `sup` within `tol` (set inclusion).
fn set_included(sub: &[Complex64], sup: &[Complex64], tol: f64) -> bool {
    sub.iter().all(|z| sup.iter().any(|w| (z - w).norm() <= tol))
}

/// Compare the imaginary-axis sets of two systems sharing `M` and `L`.
pub fn monotonicity_compare(
    sys_i: &SecondOrderSystem,
    sys_ii: &SecondOrderSystem,
    x0: &DVector<f64>,
) -> Result<MonotonicityReport> {
    compare(sys_i, sys_ii, x0, true)
}

/// As [`monotonicity_compare`] but without the symmetry and definiteness
/// checks, so counterexamples outside the hypotheses can be examined.
pub fn monotonicity_compare_unchecked(
    sys_i: &SecondOrderSystem,
    sys_ii: &SecondOrderSystem,
    x0: &DVector<f64>,
) -> Result<MonotonicityReport> {
    compare(sys_i, sys_ii, x0, false)
}

fn compare(sys_i: &SecondOrderSystem, sys_ii: &SecondOrderSystem, x0: &DVector<f64>, check: bool) -> Result<MonotonicityReport> {
    let l = sys_i.stiffness(x0);
    if !same_matrix(sys_i.inertia(), sys_ii.inertia()) {
        return Err(Error::AssumptionViolated("the two systems have different inertia".into()));
    }
    if !same_matrix(&l, &sys_ii.stiffness(x0)) {
        return Err(Error::AssumptionViolated("the two systems have different force Jacobians at x0".into()));
    }
    if check {
        let asym = linalg::asymmetry(sys_i.inertia());
        if asym > DEFAULT_TOL_SYM {
            return Err(Error::AssumptionViolated(format!("inertia M is not symmetric ({asym:.3e})")));
        }
        require_symmetric_psd(sys_i.damping(), "damping D_I")?;
        require_symmetric_psd(sys_ii.damping(), "damping D_II")?;
        let asym = linalg::asymmetry(&l);
        if asym > DEFAULT_TOL_SYM {
            return Err(Error::AssumptionViolated(format!(
                "force Jacobian at x0 is not symmetric ({asym:.3e})"
            )));
        }
    }
    let dpsd = linalg::is_psd(&(sys_ii.damping() - sys_i.damping()), DEFAULT_TOL_PSD);
    let s_i = sys_i.spectrum(x0, DEFAULT_TOL_AXIS)?;
    let s_ii = sys_ii.spectrum(x0, DEFAULT_TOL_AXIS)?;
    let tol = TOL_AXIS_MATCH * s_i.scale.max(s_ii.scale);
    let subset_holds = set_included(&s_ii.axis_set, &s_i.axis_set, tol);
    if check && dpsd && !subset_holds {
        return Err(Error::TheoremViolation(format!(
            "D_II >= D_I but C_II = {:?} is not contained in C_I = {:?}",
            s_ii.axis_set, s_i.axis_set
        )));
    }
    Ok(MonotonicityReport {
        dpsd,
        c_i: s_i.axis_set,
        c_ii: s_ii.axis_set,
        subset_holds,
        assumptions_checked: check,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UndampedSpectrum {
    /// Eigenvalues of `-M^-1 L`.
    pub mu: Vec<Complex64>,
    /// `+-sqrt(mu)`, two per `mu`.
    pub lambdas: Vec<Complex64>,
}

/// Spectrum of the undamped Jacobian through the eigenvalues of `-M^-1 L`.
///
/// The cross-check against the direct Jacobian spectrum is done on squares,
/// since a defective zero eigenvalue splits by `sqrt(eps)` in the direct
/// computation but only by `eps` after squaring.
pub fn undamped_spectral_map(m: &RMatrix, l: &RMatrix) -> Result<UndampedSpectrum> {
    let n = linalg::check_square(m, "inertia")?;
    let zero = RMatrix::zeros(n, n);
    let j = spectral::jacobian_2n(m, &zero, l)?;
    let minv = linalg::inverse(m).expect("checked by jacobian_2n");
    let mu = linalg::eigenvalues(&(-(&minv * l)));
    let mut lambdas = Vec::with_capacity(2 * n);
    for z in &mu {
        let r = z.sqrt();
        lambdas.push(r);
        lambdas.push(-r);
    }
    let direct_sq: Vec<Complex64> = linalg::eigenvalues(&j).iter().map(|z| z * z).collect();
    let doubled: Vec<Complex64> = mu.iter().flat_map(|&z| [z, z]).collect();
    let tol = 1e-8 * linalg::spectral_radius(&mu).max(1.0);
    let dist = linalg::matching_distance(&direct_sq, &doubled);
    if dist > tol {
        return Err(Error::TheoremViolation(format!(
            "undamped map differs from direct spectrum by {dist:.3e}"
        )));
    }
    Ok(UndampedSpectrum { mu, lambdas })
}

/// With symmetric positive definite `M`, `D` and `L`, every Jacobian
/// eigenvalue lies strictly in the left half plane.
pub fn asymptotic_stability_full_damping(m: &RMatrix, d: &RMatrix, l: &RMatrix) -> Result<bool> {
    require_symmetric_pd(m, "inertia M")?;
    require_symmetric_pd(d, "damping D")?;
    require_symmetric_pd(l, "stiffness L")?;
    let j = spectral::jacobian_2n(m, d, l)?;
    let report = spectral::classify_spectrum(&linalg::eigenvalues(&j), DEFAULT_TOL_AXIS);
    Ok(report.left_count == report.eigenvalues.len())
}

/// Zero is a Jacobian eigenvalue exactly when `L` is singular, whatever
/// the damping. Returns `(zero_in_spectrum, l_singular)`.
pub fn zero_eigenvalue_check(m: &RMatrix, d: &RMatrix, l: &RMatrix) -> Result<(bool, bool)> {
    let n = linalg::check_square(l, "stiffness")?;
    let j = spectral::jacobian_2n(m, d, l)?;
    let eigs = linalg::eigenvalues(&j);
    let scale = linalg::spectral_radius(&eigs).max(1.0);
    // sqrt(eps) absorbs the splitting of a defective zero eigenvalue.
    let zero_in = eigs.iter().any(|z| z.norm() <= 1e-6 * scale);
    let l_singular = spectral::real_rank(l, 1e-10) < n;
    Ok((zero_in, l_singular))
}
