//! Swing-equation models of reduced power networks.
//!
//! A model carries admittance magnitudes `Y[j][k]` and angles `theta[j][k]`,
//! terminal voltages, mechanical powers, inertia and damping constants. The
//! electrical power is `Pe_j(delta) = sum_k V_j V_k Y_jk cos(theta_jk - delta_j + delta_k)`.

mod cases;
mod io;
mod referenced;
mod theorems;

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, RMatrix};
use crate::stability::{ForceFn, ForceJacobianFn, SecondOrderSystem};

pub use cases::{case1, case2, CASE1_GAMMA_RANGE, CASE2_GAMMA_RANGE};
pub use io::{load_model, parse_model, ModelFile};
pub use referenced::{reduction_for, referenced_spectrum_check, ReferencedModel, ReferencedSpectrumCheck};
pub use theorems::{
    apply_repair, build_nonhyperbolic_family, damping_repair_suggestion, lossless_imaginary_criterion,
    small_n_hyperbolicity_check, small_n_spectrum_check, LosslessCriterion, DEFAULT_D_REPAIR,
};

pub const TOL_EQ: f64 = 1e-10;
pub const MAX_NEWTON: usize = 100;
pub const OMEGA_MARGIN: f64 = 1e-9;
pub const TOL_LOSSLESS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct PowerGridModel {
    pub name: String,
    pub y_mag: RMatrix,
    pub theta: RMatrix,
    pub v: DVector<f64>,
    pub pm: DVector<f64>,
    pub inertia: DVector<f64>,
    pub damping: DVector<f64>,
    pub omega_s: f64,
    /// `d(gamma) = damping + gamma * damping_sensitivity` for parameter sweeps.
    pub damping_sensitivity: Option<DVector<f64>>,
    /// Constant removed from `pm` so that `equilibrium` is exact.
    pub absorbed_offset: Option<DVector<f64>>,
    /// Known equilibrium angles, if the source provides them.
    pub equilibrium: Option<DVector<f64>>,
    pub delta_guess: Option<DVector<f64>>,
}

impl PowerGridModel {
    /// Build and validate. `absorbed_offset`, `equilibrium` and friends start empty.
    pub fn new(
        y_mag: RMatrix,
        theta: RMatrix,
        v: DVector<f64>,
        pm: DVector<f64>,
        inertia: DVector<f64>,
        damping: DVector<f64>,
        omega_s: f64,
    ) -> Result<Self> {
        let model = Self {
            name: String::new(),
            y_mag,
            theta,
            v,
            pm,
            inertia,
            damping,
            omega_s,
            damping_sensitivity: None,
            absorbed_offset: None,
            equilibrium: None,
            delta_guess: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.v.len();
        if n < 2 {
            return Err(Error::InvalidModel(format!("need at least two generators, got {n}")));
        }
        linalg::check_same_dim(&self.y_mag, n, "Y magnitudes")?;
        linalg::check_same_dim(&self.theta, n, "Y angles")?;
        for (what, vec) in [("Pm", &self.pm), ("inertia", &self.inertia), ("damping", &self.damping)] {
            if vec.len() != n {
                return Err(Error::InvalidModel(format!("{what} has length {}, expected {n}", vec.len())));
            }
        }
        if let Some(s) = &self.damping_sensitivity {
            if s.len() != n {
                return Err(Error::InvalidModel(format!("damping_sensitivity has length {}, expected {n}", s.len())));
            }
        }
        let all = self
            .y_mag
            .iter()
            .chain(self.theta.iter())
            .chain(self.v.iter())
            .chain(self.pm.iter())
            .chain(self.inertia.iter())
            .chain(self.damping.iter());
        if !all.into_iter().all(|x| x.is_finite()) || !self.omega_s.is_finite() {
            return Err(Error::NonFinite);
        }
        if self.omega_s <= 0.0 {
            return Err(Error::InvalidModel("omega_s must be positive".into()));
        }
        if let Some(j) = self.v.iter().position(|&x| x <= 0.0) {
            return Err(Error::InvalidModel(format!("voltage of generator {} is not positive", j + 1)));
        }
        if let Some(j) = self.inertia.iter().position(|&x| x <= 0.0) {
            return Err(Error::InvalidModel(format!("inertia of generator {} is not positive", j + 1)));
        }
        if let Some(j) = self.damping.iter().position(|&x| x < 0.0) {
            return Err(Error::InvalidModel(format!("damping of generator {} is negative", j + 1)));
        }
        for j in 0..n {
            for k in 0..n {
                if self.y_mag[(j, k)] < 0.0 {
                    return Err(Error::InvalidModel(format!("|Y[{}][{}]| is negative", j + 1, k + 1)));
                }
                if (self.y_mag[(j, k)] - self.y_mag[(k, j)]).abs() > 1e-12 * (1.0 + self.y_mag[(j, k)]) {
                    return Err(Error::InvalidModel(format!(
                        "admittance magnitudes are not symmetric at ({}, {})",
                        j + 1,
                        k + 1
                    )));
                }
                if (self.y_mag[(j, k)] == 0.0) != (self.y_mag[(k, j)] == 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "zero pattern of Y is not symmetric at ({}, {})",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        if !self.is_connected() {
            return Err(Error::InvalidModel("network graph is not connected".into()));
        }
        Ok(())
    }

    /// Lines `(j, k)` with `j < k` and nonzero admittance.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for j in 0..n {
            for k in j + 1..n {
                if self.y_mag[(j, k)] > 0.0 {
                    out.push((j, k));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(j) = queue.pop_front() {
            for (k, s) in seen.iter_mut().enumerate() {
                if k != j && !*s && self.y_mag[(j, k)] > 0.0 {
                    *s = true;
                    queue.push_back(k);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn flow(&self, delta: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(n, |j, _| {
            (0..n)
                .map(|k| {
                    self.v[j] * self.v[k] * self.y_mag[(j, k)] * (self.theta[(j, k)] - delta[j] + delta[k]).cos()
                })
                .sum()
        })
    }

    /// Edge weight `w_jk = V_j V_k Y_jk sin(theta_jk - delta_j + delta_k)`.
    pub fn weight(&self, delta: &DVector<f64>, j: usize, k: usize) -> f64 {
        self.v[j] * self.v[k] * self.y_mag[(j, k)] * (self.theta[(j, k)] - delta[j] + delta[k]).sin()
    }

    /// `dPe/ddelta`: off-diagonal `-w_jk`, diagonal `sum_k w_jk`.
    pub fn flow_jacobian(&self, delta: &DVector<f64>) -> RMatrix {
        let n = self.n();
        let mut l = RMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    let w = self.weight(delta, j, k);
                    l[(j, k)] = -w;
                    l[(j, j)] += w;
                }
            }
        }
        l
    }

    /// Lossless: `theta_jj = -pi/2` (where `Y_jj != 0`) and `theta_jk = pi/2` on every line.
    pub fn is_lossless(&self) -> bool {
        let n = self.n();
        (0..n).all(|j| {
            (0..n).all(|k| {
                if self.y_mag[(j, k)] == 0.0 {
                    return true;
                }
                let target = if j == k { -FRAC_PI_2 } else { FRAC_PI_2 };
                (self.theta[(j, k)] - target).abs() <= TOL_LOSSLESS
            })
        })
    }

    /// `theta_jk - delta_j + delta_k` wrapped into `(-pi, pi]`.
    pub fn line_angle(&self, delta: &DVector<f64>, j: usize, k: usize) -> f64 {
        wrap_angle(self.theta[(j, k)] - delta[j] + delta[k])
    }

    /// Smallest distance of a line angle to the boundary of `(0, pi)`;
    /// negative when some line leaves the interval.
    pub fn omega_margin(&self, delta: &DVector<f64>) -> f64 {
        let mut margin = f64::INFINITY;
        for (j, k) in self.edges() {
            for (a, b) in [(j, k), (k, j)] {
                let phi = self.line_angle(delta, a, b);
                margin = margin.min(phi.min(PI - phi));
            }
        }
        margin
    }

    pub fn in_omega(&self, delta: &DVector<f64>) -> bool {
        self.omega_margin(delta) > OMEGA_MARGIN
    }

    /// Damping vector at sweep parameter `gamma`.
    pub fn damping_at(&self, gamma: f64) -> DVector<f64> {
        match &self.damping_sensitivity {
            Some(s) => &self.damping + s * gamma,
            None => self.damping.clone(),
        }
    }

    /// Copy with `damping` replaced by `damping_at(gamma)`.
    pub fn at_gamma(&self, gamma: f64) -> Self {
        Self {
            damping: self.damping_at(gamma),
            ..self.clone()
        }
    }

    pub fn inertia_matrix(&self) -> RMatrix {
        RMatrix::from_diagonal(&(&self.inertia / self.omega_s))
    }

    pub fn damping_matrix(&self) -> RMatrix {
        RMatrix::from_diagonal(&(&self.damping / self.omega_s))
    }

    /// `M delta'' + D delta' + (Pe(delta) - Pm) = 0`.
    pub fn to_second_order(&self) -> SecondOrderSystem {
        let f_model = self.clone();
        let j_model = self.clone();
        let force: ForceFn = std::sync::Arc::new(move |d| f_model.flow(d) - &f_model.pm);
        let jac: ForceJacobianFn = std::sync::Arc::new(move |d| j_model.flow_jacobian(d));
        SecondOrderSystem::new(self.inertia_matrix(), self.damping_matrix(), force, jac)
            .expect("validated model has positive inertia")
    }

    /// Replace `pm` by `Pe(delta0)`, remembering the removed constant.
    pub fn absorb_offset(&mut self, delta0: &DVector<f64>) {
        let pe = self.flow(delta0);
        self.absorbed_offset = Some(&self.pm - &pe);
        self.pm = pe;
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridEquilibrium {
    pub delta0: DVector<f64>,
    pub omega0: DVector<f64>,
    /// `max |Pm - Pe(delta0)|`.
    pub residual: f64,
    pub in_omega: bool,
    pub omega_margin: f64,
    pub iterations: usize,
}

impl GridEquilibrium {
    /// Evaluate a candidate without iterating.
    pub fn at(model: &PowerGridModel, delta0: DVector<f64>) -> Self {
        let residual = (&model.pm - model.flow(&delta0)).amax();
        let omega_margin = model.omega_margin(&delta0);
        Self {
            omega0: DVector::zeros(model.n()),
            residual,
            in_omega: omega_margin > OMEGA_MARGIN,
            omega_margin,
            iterations: 0,
            delta0,
        }
    }
}

/// Gauss-Newton with backtracking on `Pe(delta) = Pm`, the last angle pinned
/// at its guess value.
pub fn solve_equilibrium(model: &PowerGridModel, guess: &DVector<f64>) -> Result<GridEquilibrium> {
    let n = model.n();
    if guess.len() != n {
        return Err(Error::DimensionMismatch(format!("guess has length {}, expected {n}", guess.len())));
    }
    if !guess.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let resid = |d: &DVector<f64>| model.flow(d) - &model.pm;
    let mut delta = guess.clone();
    let mut r = resid(&delta);
    let mut iterations = 0;
    while r.amax() > TOL_EQ {
        if iterations == MAX_NEWTON {
            return Err(Error::NoConvergence {
                iterations,
                residual: r.amax(),
                best: delta.iter().copied().collect(),
            });
        }
        iterations += 1;
        let jac = model.flow_jacobian(&delta).columns(0, n - 1).into_owned();
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() <= 1e-12 * smax.max(1e-300) {
            return Err(Error::SingularReducedJacobian);
        }
        let step = svd.solve(&(-&r), 0.0).map_err(|_| Error::SingularReducedJacobian)?;
        let mut t = 1.0;
        let base = r.norm();
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = delta.clone();
            for i in 0..n - 1 {
                trial[i] += t * step[i];
            }
            let rt = resid(&trial);
            if rt.norm() < base {
                delta = trial;
                r = rt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                residual: r.amax(),
                best: delta.iter().copied().collect(),
            });
        }
    }
    let mut eq = GridEquilibrium::at(model, delta);
    eq.iterations = iterations;
    Ok(eq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_is_shift_invariant_and_jacobian_has_zero_rows() {
        let m = case1(0.0);
        let d = DVector::from_vec(vec![0.3, -0.2, 1.1]);
        let shifted = d.add_scalar(0.37);
        assert!((m.flow(&d) - m.flow(&shifted)).amax() < 1e-13);
        let l = m.flow_jacobian(&d);
        assert!((l * DVector::from_element(3, 1.0)).amax() < 1e-12);
    }

    #[test]
    fn case1_equilibrium_and_stiffness() {
        let m = case1(0.0);
        let d0 = DVector::from_vec(vec![0.0, PI / 3.0, PI / 3.0]);
        assert!((m.flow(&d0) - &m.pm).amax() < 1e-12);
        let l = m.flow_jacobian(&d0);
        let l1 = RMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 1.0, -0.5, -0.5, -0.5, 1.0]);
        assert!((l - l1).amax() < 1e-12);
        assert!(m.is_lossless());
        assert!(m.in_omega(&d0));
    }

    #[test]
    fn newton_from_guess() {
        let m = case1(0.0);
        let eq = solve_equilibrium(&m, &DVector::from_vec(vec![0.1, 1.0, 1.0])).unwrap();
        let d = &eq.delta0;
        assert!(eq.residual <= TOL_EQ);
        assert!(((d[1] - d[0]) - PI / 3.0).abs() < 1e-9 && ((d[2] - d[0]) - PI / 3.0).abs() < 1e-9);
        let again = solve_equilibrium(&m, &eq.delta0).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn case2_is_lossy_and_outside_omega() {
        let m = case2(0.2);
        assert!(!m.is_lossless());
        let eq = solve_equilibrium(&m, &DVector::from_vec(vec![1.4, 0.0])).unwrap();
        assert!((eq.delta0[0] - 1.4905).abs() < 1e-9);
        assert!(!eq.in_omega);
    }

    #[test]
    fn perturbed_angle_is_not_lossless() {
        let mut m = case1(0.0);
        m.theta[(0, 1)] += 1e-3;
        m.theta[(1, 0)] += 1e-3;
        assert!(!m.is_lossless());
    }

    #[test]
    fn omega_scaling_keeps_damping_ratio() {
        let m = case1(0.2);
        let mut scaled = m.clone();
        let c = 2.0 * PI * 60.0;
        scaled.omega_s = c;
        let d0 = DVector::from_vec(vec![0.0, PI / 3.0, PI / 3.0]);
        let (s1, s2) = (m.to_second_order(), scaled.to_second_order());
        let ratio = |s: &SecondOrderSystem| s.inertia_inv() * s.damping();
        assert!((ratio(&s1) - ratio(&s2)).amax() < 1e-12);
        // The force is not divided by omega_s, so M^-1 L scales with it.
        let a1 = s1.inertia_inv() * s1.stiffness(&d0);
        let a2 = s2.inertia_inv() * s2.stiffness(&d0);
        assert!((a1 * c - a2).amax() < 1e-9);
    }

    #[test]
    fn rejects_disconnected_graph() {
        let mut y = RMatrix::zeros(3, 3);
        y[(0, 1)] = 1.0;
        y[(1, 0)] = 1.0;
        let ones = DVector::from_element(3, 1.0);
        let r = PowerGridModel::new(y, RMatrix::zeros(3, 3), ones.clone(), DVector::zeros(3), ones.clone(), ones, 1.0);
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }
}
