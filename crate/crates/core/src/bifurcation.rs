//! Hopf analysis along a damping path `D(gamma)`.
//!
//! The spectrum is computed on an *analysis model*: by default the
//! first-order form of the second-order system, or any reduction supplied
//! by the caller (grid models use their referenced coordinates so the
//! rotational zero eigenvalue stays out of the way). An analysis model must
//! keep the `n` velocity coordinates last and must be affine in `D`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::{self, CMatrix, CVector, RMatrix};
use crate::spectral::{self, DEFAULT_TOL_AXIS};
use crate::stability::{self, SecondOrderSystem, DEFAULT_TOL_OBS};

pub const DEFAULT_TOL_L1: f64 = 1e-5;
pub const DEFAULT_GAP_REL: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 101;
/// Bisection stops once `|Re xi| <= TOL_BISECT * |xi|`.
pub const TOL_BISECT: f64 = 1e-10;

pub type DampingFn = Arc<dyn Fn(f64) -> RMatrix + Send + Sync>;

/// A vector field together with the equilibrium to analyse.
pub struct AnalysisModel {
    pub field: Box<dyn VectorField>,
    pub state: DVector<f64>,
}

pub type ReductionFn = Arc<dyn Fn(&SecondOrderSystem, &DVector<f64>) -> Result<AnalysisModel> + Send + Sync>;

/// `M x'' + D(gamma) x' + f(x) = 0` over a closed parameter interval.
#[derive(Clone)]
pub struct DampingPath {
    base: SecondOrderSystem,
    damping: DampingFn,
    derivative: Option<DampingFn>,
    range: (f64, f64),
    h_d: f64,
    reduction: Option<ReductionFn>,
}

impl fmt::Debug for DampingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DampingPath")
            .field("n", &self.base.n())
            .field("range", &self.range)
            .field("analytic_derivative", &self.derivative.is_some())
            .field("reduced", &self.reduction.is_some())
            .finish()
    }
}

impl DampingPath {
    pub fn new(base: SecondOrderSystem, damping: DampingFn, range: (f64, f64)) -> Result<Self> {
        if !(range.0.is_finite() && range.1.is_finite()) || range.0 > range.1 {
            return Err(Error::PreconditionViolated(format!("invalid gamma range {range:?}")));
        }
        let n = base.n();
        for g in [range.0, 0.5 * (range.0 + range.1), range.1] {
            let d = damping(g);
            linalg::check_same_dim(&d, n, "D(gamma)")?;
            linalg::check_finite(&d)?;
        }
        Ok(Self {
            base,
            damping,
            derivative: None,
            range,
            h_d: 1e-6,
            reduction: None,
        })
    }

    /// `D(gamma) = D0 + gamma * D1`.
    pub fn affine(base: SecondOrderSystem, d0: RMatrix, d1: RMatrix, range: (f64, f64)) -> Result<Self> {
        let d1c = d1.clone();
        let path = Self::new(base, Arc::new(move |g| &d0 + &d1 * g), range)?;
        Ok(path.with_derivative(Arc::new(move |_| d1c.clone())).expect("exact derivative"))
    }

    /// Attach an analytic `D'(gamma)`; rejected if it disagrees with central
    /// differences of `D` by more than `1e-6 * ||D'||`.
    pub fn with_derivative(mut self, derivative: DampingFn) -> Result<Self> {
        let (a, b) = self.range;
        for g in [a, 0.5 * (a + b), b] {
            let exact = derivative(g);
            let fd = self.fd_derivative(g);
            let scale = linalg::max_abs(&exact).max(1e-300);
            let err = linalg::max_abs(&(&fd - &exact));
            if err > 1e-6 * scale.max(1.0) {
                return Err(Error::PreconditionViolated(format!(
                    "analytic D'(gamma) differs from finite differences by {err:.3e} at gamma = {g}"
                )));
            }
        }
        self.derivative = Some(derivative);
        Ok(self)
    }

    /// Run spectral analysis on a reduced model instead of the first-order form.
    pub fn with_reduction(mut self, reduction: ReductionFn) -> Self {
        self.reduction = Some(reduction);
        self
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn base(&self) -> &SecondOrderSystem {
        &self.base
    }

    pub fn damping(&self, gamma: f64) -> RMatrix {
        (self.damping)(gamma)
    }

    fn fd_derivative(&self, gamma: f64) -> RMatrix {
        let h = self.h_d * (1.0 + gamma.abs());
        (self.damping(gamma + h) - self.damping(gamma - h)) / (2.0 * h)
    }

    pub fn damping_derivative(&self, gamma: f64) -> RMatrix {
        match &self.derivative {
            Some(d) => d(gamma),
            None => self.fd_derivative(gamma),
        }
    }

    pub fn system_at(&self, gamma: f64) -> Result<SecondOrderSystem> {
        self.base.with_damping(self.damping(gamma))
    }

    fn model_for(&self, sys: &SecondOrderSystem, x0: &DVector<f64>) -> Result<AnalysisModel> {
        match &self.reduction {
            Some(r) => r(sys, x0),
            None => {
                let mut state = DVector::zeros(2 * sys.n());
                state.rows_mut(0, sys.n()).copy_from(x0);
                Ok(AnalysisModel {
                    field: Box::new(sys.first_order()),
                    state,
                })
            }
        }
    }

    pub fn analysis_model(&self, gamma: f64, x0: &DVector<f64>) -> Result<AnalysisModel> {
        self.model_for(&self.system_at(gamma)?, x0)
    }

    /// Analysis-model Jacobian at the equilibrium.
    pub fn jacobian(&self, gamma: f64, x0: &DVector<f64>) -> Result<RMatrix> {
        let m = self.analysis_model(gamma, x0)?;
        Ok(m.field.jacobian(&m.state))
    }

    /// `dJ/dgamma`. The analysis Jacobian is affine in `D`, so differencing
    /// at `D(gamma0) +- D'(gamma0)` is exact up to rounding.
    pub fn jacobian_derivative(&self, gamma: f64, x0: &DVector<f64>) -> Result<RMatrix> {
        let d = self.damping(gamma);
        let dp = self.damping_derivative(gamma);
        let plus = self.model_for(&self.base.with_damping(&d + &dp)?, x0)?;
        let minus = self.model_for(&self.base.with_damping(&d - &dp)?, x0)?;
        Ok((plus.field.jacobian(&plus.state) - minus.field.jacobian(&minus.state)) * 0.5)
    }
}

/// A parameter value where a complex pair meets the imaginary axis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AxisCrossing {
    pub gamma: f64,
    pub omega: f64,
    pub real_part: f64,
    /// Found at an end of the range; no bisection was done.
    pub boundary: bool,
}

fn axis_band(eigs: &[Complex64]) -> f64 {
    DEFAULT_TOL_AXIS * linalg::spectral_radius(eigs).max(1.0)
}

fn nearest(eigs: &[Complex64], target: Complex64) -> Complex64 {
    *eigs
        .iter()
        .min_by(|a, b| (*a - target).norm().total_cmp(&(*b - target).norm()))
        .expect("nonempty spectrum")
}

fn min_gap(eigs: &[Complex64], idx: usize) -> f64 {
    eigs.iter()
        .enumerate()
        .filter(|&(j, _)| j != idx)
        .map(|(_, z)| (z - eigs[idx]).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Sample the spectrum on `samples` equally spaced parameter values, follow
/// each eigenvalue of the upper half plane by nearest-neighbour continuity
/// and refine every sign change of its real part by bisection.
pub fn track_axis_crossing(path: &DampingPath, x0: &DVector<f64>, samples: usize) -> Result<Vec<AxisCrossing>> {
    if samples < 2 {
        return Err(Error::PreconditionViolated("at least two samples are needed".into()));
    }
    let (a, b) = path.range();
    let grid: Vec<f64> = (0..samples)
        .map(|i| if i + 1 == samples { b } else { a + (b - a) * i as f64 / (samples - 1) as f64 })
        .collect();
    let mut spectra = Vec::with_capacity(samples);
    for &g in &grid {
        spectra.push(linalg::eigenvalues(&path.jacobian(g, x0)?));
    }

    let mut out: Vec<AxisCrossing> = Vec::new();
    let push = |c: AxisCrossing, out: &mut Vec<AxisCrossing>| {
        let dup = out
            .iter()
            .any(|o| (o.gamma - c.gamma).abs() <= 1e-9 * (1.0 + c.gamma.abs()) && (o.omega - c.omega).abs() <= 1e-6 * (1.0 + c.omega));
        if !dup {
            out.push(c);
        }
    };

    for k in [0, samples - 1] {
        let eigs = &spectra[k];
        let band = axis_band(eigs);
        for z in eigs.iter().filter(|z| z.im > band && z.re.abs() <= band) {
            push(
                AxisCrossing {
                    gamma: grid[k],
                    omega: z.im,
                    real_part: z.re,
                    boundary: true,
                },
                &mut out,
            );
        }
    }

    for k in 0..samples - 1 {
        let (ea, eb) = (&spectra[k], &spectra[k + 1]);
        let band = axis_band(ea).max(axis_band(eb));
        for (i, j, dist) in linalg::match_pairs(ea, eb) {
            let (za, zb) = (ea[i], eb[j]);
            if za.im <= band || zb.im <= band {
                continue;
            }
            let interior_touch = k > 0 && za.re.abs() <= band;
            let crosses = (za.re > band && zb.re < -band) || (za.re < -band && zb.re > band);
            if !crosses && !interior_touch {
                continue;
            }
            let gap = min_gap(ea, i).min(min_gap(eb, j));
            if dist > 0.5 * gap {
                return Err(Error::TrackingAmbiguity { gamma: grid[k] });
            }
            if interior_touch {
                push(
                    AxisCrossing {
                        gamma: grid[k],
                        omega: za.im,
                        real_part: za.re,
                        boundary: false,
                    },
                    &mut out,
                );
                continue;
            }
            push(bisect(path, x0, grid[k], grid[k + 1], za, zb)?, &mut out);
        }
    }
    out.sort_by(|p, q| p.gamma.total_cmp(&q.gamma));
    Ok(out)
}

fn bisect(path: &DampingPath, x0: &DVector<f64>, mut lo: f64, mut hi: f64, mut z_lo: Complex64, mut z_hi: Complex64) -> Result<AxisCrossing> {
    let sign_lo = z_lo.re.signum();
    let mut best = if z_lo.re.abs() < z_hi.re.abs() { (lo, z_lo) } else { (hi, z_hi) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let guess = 0.5 * (z_lo + z_hi);
        let eigs = linalg::eigenvalues(&path.jacobian(mid, x0)?);
        let z = nearest(&eigs, guess);
        if z.re.abs() < best.1.re.abs() {
            best = (mid, z);
        }
        if z.re.abs() <= TOL_BISECT * z.norm() || hi - lo <= f64::EPSILON * (1.0 + mid.abs()) {
            break;
        }
        if z.re.signum() == sign_lo {
            lo = mid;
            z_lo = z;
        } else {
            hi = mid;
            z_hi = z;
        }
    }
    Ok(AxisCrossing {
        gamma: best.0,
        omega: best.1.im,
        real_part: best.1.re,
        boundary: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HopfKind {
    Supercritical,
    Subcritical,
    Degenerate,
}

impl HopfKind {
    pub fn classify(l1: f64, tol_l1: f64) -> Self {
        if l1 < -tol_l1 {
            HopfKind::Supercritical
        } else if l1 > tol_l1 {
            HopfKind::Subcritical
        } else {
            HopfKind::Degenerate
        }
    }
}

impl fmt::Display for HopfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HopfKind::Supercritical => "supercritical",
            HopfKind::Subcritical => "subcritical",
            HopfKind::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResonanceCheck {
    pub kappa: u32,
    /// `sigma_min / ||.||` of `P(i kappa omega0)`; for `kappa = 0` of the analysis Jacobian.
    pub margin: f64,
    pub clear: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct HopfOptions {
    pub tol_axis: f64,
    pub tol_obs: f64,
    pub tol_l1: f64,
    pub gap_rel: f64,
    /// Relative singularity threshold for the resonance scan.
    pub tol_resonance: f64,
}

impl Default for HopfOptions {
    fn default() -> Self {
        Self {
            tol_axis: DEFAULT_TOL_AXIS,
            tol_obs: DEFAULT_TOL_OBS,
            tol_l1: DEFAULT_TOL_L1,
            gap_rel: DEFAULT_GAP_REL,
            tol_resonance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HopfCertificate {
    pub gamma0: f64,
    pub omega0: f64,
    /// Velocity block of `r0` divided by `i omega0`: unit norm, largest entry real positive.
    pub v: CVector,
    pub r0: CVector,
    pub l0: CVector,
    /// The pair `(M^-1 L, M^-1 D(gamma0))` has an unobservable mode.
    pub unobservable: bool,
    pub simple: bool,
    pub eigen_gap: f64,
    /// `l0^* J' r0`.
    pub eigenvalue_derivative: Complex64,
    /// Relative gap between `eigenvalue_derivative` and a difference quotient.
    pub derivative_fd_error: f64,
    /// `Im(q^* M^-1 D' v)` with `q` the velocity block of `l0`.
    pub transversality: f64,
    pub k_max: u32,
    pub resonance: Vec<ResonanceCheck>,
    pub resonance_clear: bool,
    pub l1: f64,
    pub kind: HopfKind,
    /// `sigma_min(J - i omega0 I) / ||J||`.
    pub axis_residual: f64,
    pub normalization_error: f64,
}

impl HopfCertificate {
    /// Transversality, simplicity and resonance all hold.
    pub fn generic(&self) -> bool {
        self.simple && self.resonance_clear && self.transversality.abs() > 0.0 && self.kind != HopfKind::Degenerate
    }
}

/// Right and left eigenvectors of `J` for `lambda` from SVD null vectors.
pub fn eigenvector_pair(j: &RMatrix, lambda: Complex64) -> (CVector, CVector) {
    let mut shifted = linalg::to_complex(j);
    for i in 0..j.nrows() {
        shifted[(i, i)] -= lambda;
    }
    let (r, _) = linalg::null_vector(&shifted);
    let (l, _) = linalg::null_vector(&shifted.adjoint());
    (r, l)
}

/// `l^* dJ r`, the derivative of a simple eigenvalue along a parameter.
pub fn eigenvalue_parameter_derivative(
    j: &RMatrix,
    dj: &RMatrix,
    lambda: Complex64,
    r: &CVector,
    l: &CVector,
) -> Result<Complex64> {
    let norm = l.dotc(r);
    if (norm - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::NormalizationFailure(format!("l^* r = {norm}, expected 1")));
    }
    let jc = linalg::to_complex(j);
    let scale = linalg::spectral_norm(j).max(1.0);
    let rr = (&jc * r - r * lambda).norm() / r.norm();
    let lr = (jc.adjoint() * l - l * lambda.conj()).norm() / l.norm();
    if rr > 1e-8 * scale || lr > 1e-8 * scale {
        return Err(Error::NormalizationFailure(format!(
            "eigenvector residuals {rr:.3e} (right), {lr:.3e} (left)"
        )));
    }
    Ok(l.dotc(&(linalg::to_complex(dj) * r)))
}

fn phase_normalize(r: &mut CVector, v_start: usize, omega0: f64) {
    let iw = Complex64::new(0.0, omega0);
    let v: CVector = r.rows(v_start, r.len() - v_start).map(|z| z / iw);
    let k = (0..v.len()).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).expect("nonempty");
    let phase = v[k] / v[k].norm();
    let s = Complex64::new(1.0, 0.0) / (phase * v.norm());
    *r *= s;
}

/// Hopf certificate at a parameter value where an imaginary pair is present.
pub fn hopf_conditions(path: &DampingPath, x0: &DVector<f64>, gamma0: f64) -> Result<HopfCertificate> {
    hopf_conditions_with(path, x0, gamma0, &HopfOptions::default())
}

pub fn hopf_conditions_with(path: &DampingPath, x0: &DVector<f64>, gamma0: f64, opts: &HopfOptions) -> Result<HopfCertificate> {
    let n = path.base().n();
    let model = path.analysis_model(gamma0, x0)?;
    let j = model.field.jacobian(&model.state);
    let dim = j.nrows();
    let eigs = linalg::eigenvalues(&j);
    let scale = linalg::spectral_radius(&eigs).max(1.0);
    let band = opts.tol_axis * scale;

    let (idx, lambda) = eigs
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, z)| z.im > band)
        .min_by(|a, b| a.1.re.abs().total_cmp(&b.1.re.abs()))
        .ok_or(Error::NotAnAxisEigenvalue { real_part: f64::NAN })?;
    if lambda.re.abs() > band {
        return Err(Error::NotAnAxisEigenvalue { real_part: lambda.re });
    }
    let omega0 = lambda.im;
    let iw = Complex64::new(0.0, omega0);

    let (mut r, mut l) = eigenvector_pair(&j, lambda);
    phase_normalize(&mut r, dim - n, omega0);
    let s = l.dotc(&r);
    if s.norm() < 1e-14 {
        return Err(Error::NormalizationFailure("left and right eigenvectors are orthogonal".into()));
    }
    l /= s.conj();
    let normalization_error = (l.dotc(&r) - 1.0).norm();

    let eigen_gap = min_gap(&eigs, idx);
    let simple = eigen_gap > opts.gap_rel * scale;

    let sys = path.system_at(gamma0)?;
    let minv = sys.inertia_inv();
    let stiffness = sys.stiffness(x0);
    let obs = stability::observability_test(&(minv * &stiffness), &(minv * sys.damping()), opts.tol_obs)?;

    let dj = path.jacobian_derivative(gamma0, x0)?;
    let xi_prime = eigenvalue_parameter_derivative(&j, &dj, lambda, &r, &l)?;
    let v: CVector = r.rows(dim - n, n).map(|z| z / iw);
    let q: CVector = l.rows(dim - n, n).into_owned();
    let dprime = linalg::to_complex(&(minv * path.damping_derivative(gamma0)));
    let transversality = q.dotc(&(dprime * &v)).im;

    let derivative_fd_error = {
        let h = 1e-6 * (1.0 + gamma0.abs());
        let zp = nearest(&linalg::eigenvalues(&path.jacobian(gamma0 + h, x0)?), lambda);
        let zm = nearest(&linalg::eigenvalues(&path.jacobian(gamma0 - h, x0)?), lambda);
        let fd = (zp - zm) / (2.0 * h);
        (fd - xi_prime).norm() / xi_prime.norm().max(1e-300)
    };

    let rho_a = linalg::spectral_radius(&linalg::eigenvalues(&(minv * &stiffness)));
    let k_max = ((rho_a.sqrt() / omega0).ceil() as u32).saturating_add(2);
    let mut resonance = Vec::new();
    let jsv = linalg::real_singular_values(&j);
    let margin0 = jsv.last().copied().unwrap_or(0.0) / jsv.first().copied().unwrap_or(1.0).max(1e-300);
    resonance.push(ResonanceCheck {
        kappa: 0,
        margin: margin0,
        clear: margin0 > opts.tol_resonance,
    });
    let pencil = spectral::QuadraticPencil::new(sys.inertia().clone(), sys.damping().clone(), stiffness.clone())?;
    for kappa in 2..=k_max {
        let p = pencil.evaluate(Complex64::new(0.0, kappa as f64 * omega0));
        let sv = linalg::singular_values(&p);
        let margin = sv.last().copied().unwrap_or(0.0) / sv[0].max(1e-300);
        resonance.push(ResonanceCheck {
            kappa,
            margin,
            clear: margin > opts.tol_resonance,
        });
    }
    let resonance_clear = resonance.iter().all(|c| c.clear);

    let l1 = first_lyapunov_coefficient(model.field.as_ref(), &model.state, omega0)?;
    let axis_residual = {
        let mut shifted = linalg::to_complex(&j);
        for i in 0..dim {
            shifted[(i, i)] -= iw;
        }
        linalg::null_vector(&shifted).1 / linalg::spectral_norm(&j).max(1e-300)
    };

    Ok(HopfCertificate {
        gamma0,
        omega0,
        v,
        r0: r,
        l0: l,
        unobservable: !obs.observable,
        simple,
        eigen_gap,
        eigenvalue_derivative: xi_prime,
        derivative_fd_error,
        transversality,
        k_max,
        resonance,
        resonance_clear,
        l1,
        kind: HopfKind::classify(l1, opts.tol_l1),
        axis_residual,
        normalization_error,
    })
}

/// Finite-difference steps for second and third directional derivatives.
pub fn fd_steps(x0: &DVector<f64>) -> (f64, f64) {
    let s = x0.norm() + 1.0;
    (f64::EPSILON.cbrt() * s, f64::EPSILON.powf(0.25) * s)
}

/// `B(u, w) = D^2 F(x0)[u, w]` for real directions.
fn bilinear_real(field: &dyn VectorField, x0: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, h: f64) -> DVector<f64> {
    let f = |a: f64, b: f64| field.eval(&(x0 + u * (a * h) + w * (b * h)));
    (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h)
}

/// `C(u, w, z) = D^3 F(x0)[u, w, z]` for real directions.
fn trilinear_real(
    field: &dyn VectorField,
    x0: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
    z: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let mut acc = DVector::zeros(x0.len());
    for a in [1.0, -1.0] {
        for b in [1.0, -1.0] {
            for c in [1.0, -1.0] {
                acc += field.eval(&(x0 + (u * a + w * b + z * c) * h)) * (a * b * c);
            }
        }
    }
    acc / (8.0 * h * h * h)
}

fn split(v: &CVector) -> [(DVector<f64>, Complex64); 2] {
    [
        (v.map(|z| z.re), Complex64::new(1.0, 0.0)),
        (v.map(|z| z.im), Complex64::new(0.0, 1.0)),
    ]
}

fn bilinear(field: &dyn VectorField, x0: &DVector<f64>, u: &CVector, w: &CVector, h: f64) -> CVector {
    let mut acc = CVector::zeros(x0.len());
    for (ur, cu) in split(u) {
        for (wr, cw) in split(w) {
            if ur.norm() == 0.0 || wr.norm() == 0.0 {
                continue;
            }
            acc += bilinear_real(field, x0, &ur, &wr, h).map(|x| Complex64::new(x, 0.0)) * (cu * cw);
        }
    }
    acc
}

fn trilinear(field: &dyn VectorField, x0: &DVector<f64>, u: &CVector, w: &CVector, z: &CVector, h: f64) -> CVector {
    let mut acc = CVector::zeros(x0.len());
    for (ur, cu) in split(u) {
        for (wr, cw) in split(w) {
            for (zr, cz) in split(z) {
                if ur.norm() == 0.0 || wr.norm() == 0.0 || zr.norm() == 0.0 {
                    continue;
                }
                acc += trilinear_real(field, x0, &ur, &wr, &zr, h).map(|x| Complex64::new(x, 0.0)) * (cu * cw * cz);
            }
        }
    }
    acc
}

/// First Lyapunov coefficient of the Hopf point `x0` with frequency `omega0`,
/// by the standard center-manifold projection formula with multilinear
/// forms from central differences.
///
/// Eigenvectors are recomputed here with `<q, q> = 1`, `<p, q> = 1`.
pub fn first_lyapunov_coefficient(field: &dyn VectorField, x0: &DVector<f64>, omega0: f64) -> Result<f64> {
    let (h2, h3) = fd_steps(x0);
    first_lyapunov_coefficient_with_steps(field, x0, omega0, h2, h3)
}

pub fn first_lyapunov_coefficient_with_steps(
    field: &dyn VectorField,
    x0: &DVector<f64>,
    omega0: f64,
    h2: f64,
    h3: f64,
) -> Result<f64> {
    let a = field.jacobian(x0);
    let dim = a.nrows();
    let iw = Complex64::new(0.0, omega0);
    let ac: CMatrix = linalg::to_complex(&a);

    let (q, l) = eigenvector_pair(&a, iw);
    let q = &q / Complex64::new(q.norm(), 0.0);
    // l^* A = i w l^*  gives  A^T l = -i w l, so l already satisfies the adjoint equation.
    let p = l;
    let s = p.dotc(&q);
    if s.norm() < 1e-14 {
        return Err(Error::NormalizationFailure("<p, q> vanishes".into()));
    }
    let p = p / s.conj();

    let qb = q.map(|z| z.conj());
    let g20 = bilinear(field, x0, &q, &q, h2);
    let g11 = bilinear(field, x0, &q, &qb, h2);
    let a_inv = linalg::complex_inverse(&ac).ok_or(Error::Singular { rank: dim - 1, n: dim })?;
    let mut shifted = -ac.clone();
    for i in 0..dim {
        shifted[(i, i)] += iw * 2.0;
    }
    let shifted_inv = linalg::complex_inverse(&shifted).ok_or(Error::Singular { rank: dim - 1, n: dim })?;
    let s11 = &a_inv * &g11;
    let s20 = &shifted_inv * &g20;
    let c = trilinear(field, x0, &q, &q, &qb, h3);
    let val = p.dotc(&c) - p.dotc(&bilinear(field, x0, &q, &s11, h2)) * 2.0 + p.dotc(&bilinear(field, x0, &qb, &s20, h2));
    Ok(val.re / (2.0 * omega0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;

    fn normal_form(sigma: f64) -> impl VectorField {
        FnField::new(2, move |x: &DVector<f64>| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            DVector::from_vec(vec![-x[1] + sigma * x[0] * r2, x[0] + sigma * x[1] * r2])
        })
    }

    #[test]
    fn normal_form_sign() {
        let x0 = DVector::zeros(2);
        for sigma in [-0.7, 0.3] {
            let l1 = first_lyapunov_coefficient(&normal_form(sigma), &x0, 1.0).unwrap();
            // With <q, q> = 1 the cubic term contributes C(q, q, conj q) = 4 sigma q.
            assert!((l1 - 2.0 * sigma).abs() < 1e-4, "sigma {sigma}, l1 {l1}");
        }
    }

    #[test]
    fn derivative_identities() {
        let j = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.3]);
        let eigs = linalg::eigenvalues(&j);
        let lam = eigs[0];
        let (r, l) = eigenvector_pair(&j, lam);
        let l = &l / l.dotc(&r).conj();
        let zero = eigenvalue_parameter_derivative(&j, &RMatrix::zeros(2, 2), lam, &r, &l).unwrap();
        assert!(zero.norm() < 1e-14);
        let same = eigenvalue_parameter_derivative(&j, &j, lam, &r, &l).unwrap();
        assert!((same - lam).norm() < 1e-12);
        let bad = &l * Complex64::new(2.0, 0.0);
        assert!(matches!(
            eigenvalue_parameter_derivative(&j, &j, lam, &r, &bad),
            Err(Error::NormalizationFailure(_))
        ));
    }

    #[test]
    fn constant_full_damping_has_no_crossing() {
        let i2 = RMatrix::identity(2, 2);
        let base = SecondOrderSystem::linear(i2.clone(), i2.clone(), i2.clone()).unwrap();
        let path = DampingPath::affine(base, i2.clone(), RMatrix::zeros(2, 2), (0.0, 1.0)).unwrap();
        assert!(track_axis_crossing(&path, &DVector::zeros(2), 11).unwrap().is_empty());
    }

    #[test]
    fn scalar_oscillator_crosses_at_zero_damping() {
        let i1 = RMatrix::identity(1, 1);
        let base = SecondOrderSystem::linear(i1.clone(), i1.clone(), i1.clone()).unwrap();
        let path = DampingPath::affine(base, RMatrix::zeros(1, 1), i1, (-0.5, 0.7)).unwrap();
        let c = track_axis_crossing(&path, &DVector::zeros(1), 8).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].gamma.abs() < 1e-9 && !c[0].boundary);
        assert!((c[0].omega - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_analytic_derivative_is_rejected() {
        let i1 = RMatrix::identity(1, 1);
        let base = SecondOrderSystem::linear(i1.clone(), i1.clone(), i1.clone()).unwrap();
        let path = DampingPath::new(base, Arc::new(|g| RMatrix::from_element(1, 1, g)), (0.0, 1.0)).unwrap();
        assert!(path.with_derivative(Arc::new(|_| RMatrix::from_element(1, 1, 2.0))).is_err());
    }
}
