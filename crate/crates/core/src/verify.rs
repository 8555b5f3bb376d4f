//! Seeded randomized property suites. Each suite draws instances from its own
//! ChaCha stream, so results do not depend on which other suites run.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::grid::{self, GridEquilibrium, PowerGridModel};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::perturbation::{self, PsdPerturbationInstance};
use crate::spectral::{self, QuadraticPencil};
use crate::stability::{self, SecondOrderSystem};

pub const DEFAULT_SEED: u64 = 20240501;
/// Agreement tolerance for spectral identities.
pub const TOL_IDENTITY: f64 = 1e-7;

/// Deliberate defects for checking that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fault {
    /// Negate the edge weights when assembling grid stiffness matrices.
    FlipWeightSign,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Multiplies every trial count (at least one trial per suite).
    pub trial_scale: f64,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            trial_scale: 1.0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub suite: &'static str,
    pub trial: usize,
    pub seed: u64,
    pub detail: String,
    pub instance: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub passed: usize,
    pub failures: Vec<FailureRecord>,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.passed == self.trials
    }
}

type Outcome = std::result::Result<(), String>;
type Trial = fn(&mut ChaCha8Rng, usize, &VerifyOptions) -> (Value, Outcome);

pub struct Suite {
    pub name: &'static str,
    pub trials: usize,
    run: Trial,
}

pub fn suites() -> Vec<Suite> {
    vec![
        Suite { name: "rank-monotonicity", trials: 2000, run: rank_monotonicity_trial },
        Suite { name: "inverse-imag-duality", trials: 1000, run: duality_trial },
        Suite { name: "rank-one-imag-update", trials: 1000, run: rank_one_trial },
        Suite { name: "psd-imag-update", trials: 1000, run: psd_update_trial },
        Suite { name: "observability-hyperbolicity", trials: 500, run: observability_trial },
        Suite { name: "damping-monotonicity", trials: 500, run: damping_monotonicity_trial },
        Suite { name: "pencil-jacobian", trials: 200, run: pencil_trial },
        Suite { name: "undamped-map", trials: 200, run: undamped_trial },
        Suite { name: "referenced-spectrum", trials: 200, run: referenced_trial },
        Suite { name: "full-damping-stability", trials: 500, run: full_damping_trial },
        Suite { name: "small-network-hyperbolicity", trials: 500, run: small_network_trial },
        Suite { name: "nonhyperbolic-family", trials: 5, run: family_trial },
        Suite { name: "lossless-damped-no-pair", trials: 200, run: lossless_damped_trial },
        Suite { name: "fold-exclusion", trials: 200, run: fold_trial },
    ]
}

fn suite_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the suite name keeps streams independent of suite order.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    seed ^ h
}

pub fn run_suite(suite: &Suite, opts: &VerifyOptions) -> SuiteResult {
    let trials = ((suite.trials as f64 * opts.trial_scale).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(suite_seed(opts.seed, suite.name));
    let mut passed = 0;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let (instance, outcome) = (suite.run)(&mut rng, trial, opts);
        match outcome {
            Ok(()) => passed += 1,
            Err(detail) => failures.push(FailureRecord {
                suite: suite.name,
                trial,
                seed: opts.seed,
                detail,
                instance,
            }),
        }
    }
    log::info!("{}: {passed}/{trials}", suite.name);
    SuiteResult {
        name: suite.name,
        trials,
        passed,
        failures,
    }
}

pub fn run_all(opts: &VerifyOptions) -> Vec<SuiteResult> {
    suites().iter().map(|s| run_suite(s, opts)).collect()
}

pub fn run_named(name: &str, opts: &VerifyOptions) -> Option<SuiteResult> {
    suites().iter().find(|s| s.name == name).map(|s| run_suite(s, opts))
}

fn mat_json(a: &RMatrix) -> Value {
    json!((0..a.nrows()).map(|i| a.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn cmat_json(a: &CMatrix) -> Value {
    json!((0..a.nrows())
        .map(|i| a.row(i).iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RMatrix {
    RMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> RMatrix {
    let a = uniform(rng, n, n);
    (&a + a.transpose()) * 0.5
}

/// `G^T G` with `G` of shape `rank x n`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> RMatrix {
    let g = uniform(rng, rank, n);
    g.transpose() * g
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> RMatrix {
    let shift = rng.gen_range(0.05..1.0);
    random_psd(rng, n, n) + RMatrix::identity(n, n) * shift
}

/// Symmetric, rank `rank`, with eigenvalue signs drawn at random.
pub fn random_symmetric_rank(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> RMatrix {
    let g = uniform(rng, rank, n);
    let signs = RMatrix::from_diagonal(&DVector::from_fn(rank, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }));
    g.transpose() * signs * g
}

/// Weighted graph Laplacian of a random connected graph (spanning path plus
/// random chords).
pub fn random_laplacian(rng: &mut ChaCha8Rng, n: usize) -> RMatrix {
    let mut l = RMatrix::zeros(n, n);
    let add = |l: &mut RMatrix, j: usize, k: usize, w: f64| {
        l[(j, k)] -= w;
        l[(k, j)] -= w;
        l[(j, j)] += w;
        l[(k, k)] += w;
    };
    for j in 1..n {
        let w = rng.gen_range(0.2..2.0);
        add(&mut l, j - 1, j, w);
    }
    for j in 0..n {
        for k in j + 2..n {
            if rng.gen_bool(0.3) {
                let w = rng.gen_range(0.2..2.0);
                add(&mut l, j, k, w);
            }
        }
    }
    l
}

/// Projector onto the orthogonal complement of `x`.
fn complement_projector(x: &DVector<f64>) -> RMatrix {
    let n = x.len();
    let u = x.normalize();
    RMatrix::identity(n, n) - &u * u.transpose()
}

/// Random real eigenvector of `M^-1 L` for SPD `M` and symmetric `L`.
fn real_mode(m: &RMatrix, l: &RMatrix, rng: &mut ChaCha8Rng) -> DVector<f64> {
    // M^-1 L is similar to the symmetric M^-1/2 L M^-1/2.
    let eig = m.clone().symmetric_eigen();
    let m_half_inv = &eig.eigenvectors
        * RMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let s = linalg::symmetrize(&(&m_half_inv * l * &m_half_inv));
    let se = s.symmetric_eigen();
    let k = rng.gen_range(0..se.eigenvalues.len());
    &m_half_inv * se.eigenvectors.column(k)
}

fn rank_monotonicity_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(1..=8);
    let kind = rng.gen_range(0..3);
    let (a, d) = match kind {
        // Laplacian-like A with zero row sums, D blind to the ones vector:
        // A + iD is singular by construction.
        0 => {
            let a = random_laplacian(rng, n.max(2));
            let n2 = a.nrows();
            let p = complement_projector(&DVector::from_element(n2, 1.0));
            let r = rng.gen_range(0..n2);
            let d = &p * random_psd(rng, n2, r) * &p;
            (a, linalg::symmetrize(&d))
        }
        1 => {
            let ra = rng.gen_range(0..=n);
            let rd = rng.gen_range(0..=n);
            (random_symmetric_rank(rng, n, ra), random_psd(rng, n, rd))
        }
        _ => {
            let rd = rng.gen_range(0..=n);
            (random_symmetric(rng, n), random_psd(rng, n, rd))
        }
    };
    let n = a.nrows();
    let re = rng.gen_range(0..=n);
    let e = random_psd(rng, n, re);
    let instance = json!({"A": mat_json(&a), "D": mat_json(&d), "E": mat_json(&e)});
    let outcome = match PsdPerturbationInstance::new(a.clone(), d.clone(), e.clone()) {
        Ok(inst) => {
            let cmp = perturbation::rank_comparison(inst.a(), inst.d(), inst.e(), perturbation::TOL_RANK_COMPARE);
            check(perturbation::rank_monotonicity_holds(&inst), || {
                format!("rank dropped from {} to {}", cmp.base, cmp.perturbed)
            })
        }
        Err(e) => Err(format!("generator produced a nonconforming instance: {e}")),
    };
    (instance, outcome)
}

/// Nonsingular complex symmetric `S` with `Im(S)` PSD.
fn random_psd_imag_symmetric(rng: &mut ChaCha8Rng) -> CMatrix {
    loop {
        let n = rng.gen_range(1..=8);
        let a = random_symmetric(rng, n);
        let r = rng.gen_range(0..=n);
        let p = random_psd(rng, n, r);
        let s = CMatrix::from_fn(n, n, |i, j| Complex64::new(a[(i, j)], p[(i, j)]));
        let sv = linalg::singular_values(&s);
        if sv.last().copied().unwrap_or(0.0) > 1e-6 * sv[0] {
            return s;
        }
    }
}

fn duality_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let s = random_psd_imag_symmetric(rng);
    let instance = json!({"S": cmat_json(&s)});
    let outcome = match perturbation::check_inverse_imag_duality(&s) {
        Ok((im_s, im_inv)) => check(im_s && im_inv, || format!("flags ({im_s}, {im_inv})")),
        Err(e) => Err(e.to_string()),
    };
    (instance, outcome)
}

fn rank_one_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let s = random_psd_imag_symmetric(rng);
    let v: Vec<f64> = (0..s.nrows()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let instance = json!({"S": cmat_json(&s), "v": v});
    let outcome = match perturbation::rank_one_imag_update_nonsingular(&s, &v) {
        Ok(ok) => check(ok, || "S + i v v^T is singular".into()),
        Err(e) => Err(e.to_string()),
    };
    (instance, outcome)
}

fn psd_update_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let s = random_psd_imag_symmetric(rng);
    let n = s.nrows();
    let r = rng.gen_range(0..=n);
    let e = random_psd(rng, n, r);
    let instance = json!({"S": cmat_json(&s), "E": mat_json(&e)});
    let outcome = match perturbation::psd_imag_update_nonsingular(&s, &e) {
        Ok(ok) => check(ok, || "S + iE is singular".into()),
        Err(e) => Err(e.to_string()),
    };
    (instance, outcome)
}

/// Stiffness of a random lossless grid at a random point of Omega plus a
/// positive shunt, so that it is SPD. Under `Fault::FlipWeightSign` the edge
/// weights enter with the wrong sign.
fn grid_stiffness(rng: &mut ChaCha8Rng, n: usize, fault: Option<Fault>) -> RMatrix {
    let (model, eq) = random_lossless_grid(rng, n, false);
    let mut l = RMatrix::zeros(n, n);
    let sign = if fault == Some(Fault::FlipWeightSign) { -1.0 } else { 1.0 };
    for (j, k) in model.edges() {
        for (a, b) in [(j, k), (k, j)] {
            let w = sign * model.weight(&eq.delta0, a, b);
            l[(a, b)] -= w;
            l[(a, a)] += w;
        }
    }
    for j in 0..n {
        l[(j, j)] += rng.gen_range(0.05..0.5);
    }
    l
}

fn observability_trial(rng: &mut ChaCha8Rng, _: usize, opts: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(2..=6);
    let m = random_spd(rng, n);
    let l = if rng.gen_bool(0.5) {
        random_spd(rng, n)
    } else {
        grid_stiffness(rng, n, opts.fault)
    };
    let r = rng.gen_range(0..=n);
    let mut d = random_psd(rng, n, r);
    if rng.gen_bool(0.4) {
        // Hide one mode of M^-1 L from the damping.
        let x = real_mode(&m, &l, rng);
        let p = complement_projector(&x);
        d = linalg::symmetrize(&(&p * d * &p));
    }
    let instance = json!({"M": mat_json(&m), "D": mat_json(&d), "L": mat_json(&l)});
    let outcome = SecondOrderSystem::linear(m, d, l)
        .and_then(|sys| stability::hyperbolicity_symmetric(&sys, &DVector::zeros(n)))
        .map_err(|e| e.to_string())
        .and_then(|v| {
            check(v.hyperbolic == v.via_observability, || {
                format!("spectrum says {} but observability says {}", v.hyperbolic, v.via_observability)
            })
        });
    (instance, outcome)
}

fn damping_monotonicity_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(2..=6);
    let m = random_spd(rng, n);
    let l = if rng.gen_bool(0.7) {
        random_spd(rng, n)
    } else {
        random_symmetric(rng, n)
    };
    let x = real_mode(&m, &l, rng);
    let p = complement_projector(&x);
    let r1 = rng.gen_range(0..n);
    let d1 = linalg::symmetrize(&(&p * random_psd(rng, n, r1) * &p));
    let r2 = rng.gen_range(0..=n);
    let mut extra = random_psd(rng, n, r2);
    if rng.gen_bool(0.5) {
        extra = linalg::symmetrize(&(&p * extra * &p));
    }
    let d2 = &d1 + extra;
    let instance = json!({"M": mat_json(&m), "L": mat_json(&l), "D_I": mat_json(&d1), "D_II": mat_json(&d2)});
    let outcome = (|| {
        let s1 = SecondOrderSystem::linear(m.clone(), d1, l.clone()).map_err(|e| e.to_string())?;
        let s2 = SecondOrderSystem::linear(m, d2, l).map_err(|e| e.to_string())?;
        let rep = stability::monotonicity_compare(&s1, &s2, &DVector::zeros(n)).map_err(|e| e.to_string())?;
        check(rep.dpsd && rep.subset_holds, || {
            format!("dpsd {} subset {} C_I {:?} C_II {:?}", rep.dpsd, rep.subset_holds, rep.c_i, rep.c_ii)
        })
    })();
    (instance, outcome)
}

fn pencil_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(1..=6);
    let m = uniform(rng, n, n) + RMatrix::identity(n, n) * 2.0;
    let d = uniform(rng, n, n);
    let l = uniform(rng, n, n);
    let instance = json!({"M": mat_json(&m), "D": mat_json(&d), "L": mat_json(&l)});
    let outcome = (|| {
        let pencil = QuadraticPencil::new(m.clone(), d.clone(), l.clone()).map_err(|e| e.to_string())?;
        let from_pencil = spectral::pencil_eigenvalues(&pencil).map_err(|e| e.to_string())?;
        let from_jac = linalg::eigenvalues(&spectral::jacobian_2n(&m, &d, &l).map_err(|e| e.to_string())?);
        let scale = linalg::spectral_radius(&from_jac).max(1.0);
        let dist = linalg::matching_distance(&from_pencil, &from_jac);
        check(dist <= TOL_IDENTITY * scale, || format!("matching distance {dist:.3e}"))?;
        let worst = from_pencil.iter().map(|&z| pencil.relative_residual(z)).fold(0.0, f64::max);
        check(worst <= TOL_IDENTITY, || format!("pencil residual {worst:.3e}"))?;
        let conj: Vec<Complex64> = from_jac.iter().map(|z| z.conj()).collect();
        let cdist = linalg::matching_distance(&conj, &from_jac);
        check(cdist <= TOL_IDENTITY * scale, || format!("conjugate closure off by {cdist:.3e}"))
    })();
    (instance, outcome)
}

fn undamped_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(1..=6);
    let m = random_spd(rng, n);
    let l = random_symmetric(rng, n);
    let instance = json!({"M": mat_json(&m), "L": mat_json(&l)});
    let outcome = (|| {
        let map = stability::undamped_spectral_map(&m, &l).map_err(|e| e.to_string())?;
        let direct = linalg::eigenvalues(&spectral::jacobian_2n(&m, &RMatrix::zeros(n, n), &l).map_err(|e| e.to_string())?);
        let scale = linalg::spectral_radius(&direct).max(1.0);
        let squared: Vec<Complex64> = direct.iter().map(|z| z * z).collect();
        let doubled: Vec<Complex64> = map.mu.iter().flat_map(|&mu| [mu, mu]).collect();
        let dist = linalg::matching_distance(&squared, &doubled);
        check(dist <= TOL_IDENTITY * scale * scale, || format!("squared spectrum off by {dist:.3e}"))
    })();
    (instance, outcome)
}

/// Random connected grid with an equilibrium at a random point of Omega.
/// `pm` is set to the flow there, so the point is exact.
pub fn random_lossless_grid(rng: &mut ChaCha8Rng, n: usize, lossy: bool) -> (PowerGridModel, GridEquilibrium) {
    loop {
        let mut y = RMatrix::zeros(n, n);
        let mut theta = RMatrix::zeros(n, n);
        let link = |y: &mut RMatrix, theta: &mut RMatrix, j: usize, k: usize, rng: &mut ChaCha8Rng| {
            let mag = rng.gen_range(0.5..3.0);
            let ang = if lossy {
                FRAC_PI_2 + rng.gen_range(-0.3..0.3)
            } else {
                FRAC_PI_2
            };
            for (a, b) in [(j, k), (k, j)] {
                y[(a, b)] = mag;
                theta[(a, b)] = ang;
            }
        };
        for j in 1..n {
            let prev = rng.gen_range(0..j);
            link(&mut y, &mut theta, prev, j, rng);
        }
        for j in 0..n {
            for k in j + 1..n {
                if y[(j, k)] == 0.0 && rng.gen_bool(0.3) {
                    link(&mut y, &mut theta, j, k, rng);
                }
            }
        }
        for j in 0..n {
            y[(j, j)] = rng.gen_range(0.0..2.0);
            theta[(j, j)] = if lossy {
                -FRAC_PI_2 + rng.gen_range(-0.3..0.3)
            } else {
                -FRAC_PI_2
            };
        }
        let v = DVector::from_fn(n, |_, _| rng.gen_range(0.95..1.05));
        let inertia = DVector::from_fn(n, |_, _| rng.gen_range(0.5..2.0));
        let damping = DVector::from_fn(n, |_, _| rng.gen_range(0.0..1.0));
        let delta = DVector::from_fn(n, |_, _| rng.gen_range(-0.6..0.6));
        let Ok(mut model) = PowerGridModel::new(y, theta, v, DVector::zeros(n), inertia, damping, 1.0) else {
            continue;
        };
        model.pm = model.flow(&delta);
        let eq = GridEquilibrium::at(&model, delta);
        if eq.in_omega {
            return (model, eq);
        }
    }
}

fn referenced_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(2..=6);
    let (model, eq) = random_lossless_grid(rng, n, false);
    let instance = json!({"model": model, "delta0": eq.delta0.as_slice()});
    let outcome = grid::referenced_spectrum_check(&model, &eq)
        .map(|_| ())
        .map_err(|e| e.to_string());
    (instance, outcome)
}

fn full_damping_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(1..=8);
    let m = random_spd(rng, n);
    let d = random_spd(rng, n);
    let l = random_spd(rng, n);
    let instance = json!({"M": mat_json(&m), "D": mat_json(&d), "L": mat_json(&l)});
    let outcome = stability::asymptotic_stability_full_damping(&m, &d, &l)
        .map_err(|e| e.to_string())
        .and_then(|ok| check(ok, || "an eigenvalue is not strictly in the left half plane".into()));
    (instance, outcome)
}

fn small_network_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(2..=3);
    let (mut model, eq) = random_lossless_grid(rng, n, true);
    let undamped = rng.gen_range(0..n);
    for j in 0..n {
        model.damping[j] = if j == undamped { 0.0 } else { rng.gen_range(0.1..2.0) };
    }
    let instance = json!({"model": model, "delta0": eq.delta0.as_slice()});
    let outcome = grid::small_n_hyperbolicity_check(&model, &eq)
        .map_err(|e| e.to_string())
        .and_then(|ok| check(ok, || "imaginary pair present".into()));
    (instance, outcome)
}

fn family_trial(rng: &mut ChaCha8Rng, trial: usize, _: &VerifyOptions) -> (Value, Outcome) {
    // Cycles through n = 2..=6 as trials advance.
    let n = 2 + trial % 5;
    let tail: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.1..3.0)).collect();
    let instance = json!({"n": n, "d_tail": tail});
    let outcome = grid::build_nonhyperbolic_family(n, &tail)
        .map(|_| ())
        .map_err(|e| e.to_string());
    (instance, outcome)
}

fn lossless_damped_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(2..=6);
    let (mut model, eq) = random_lossless_grid(rng, n, false);
    for j in 0..n {
        model.damping[j] = rng.gen_range(0.05..2.0);
    }
    let instance = json!({"model": model, "delta0": eq.delta0.as_slice()});
    let outcome = grid::lossless_imaginary_criterion(&model, &eq)
        .map_err(|e| e.to_string())
        .and_then(|c| check(!c.imaginary_pair_exists, || format!("pair {:?}", c.axis_eigenvalues)));
    (instance, outcome)
}

fn fold_trial(rng: &mut ChaCha8Rng, _: usize, _: &VerifyOptions) -> (Value, Outcome) {
    let n = rng.gen_range(2..=6);
    let m = random_spd(rng, n);
    let singular = rng.gen_bool(0.5);
    let l = if singular {
        random_laplacian(rng, n)
    } else {
        random_spd(rng, n)
    };
    let r = rng.gen_range(0..=n);
    let d = random_psd(rng, n, r);
    let instance = json!({"M": mat_json(&m), "D": mat_json(&d), "L": mat_json(&l)});
    let outcome = stability::zero_eigenvalue_check(&m, &d, &l)
        .map_err(|e| e.to_string())
        .and_then(|(zero_in, l_singular)| {
            check(zero_in == l_singular && l_singular == singular, || {
                format!("zero in spectrum {zero_in}, L singular {l_singular}, built singular {singular}")
            })
        });
    (instance, outcome)
}

/// Prints one line per suite; returns whether all passed.
pub fn render_report(results: &[SuiteResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{:<30} {:>5}/{:<5} {}\n",
            r.name,
            r.passed,
            r.trials,
            if r.ok() { "ok" } else { "FAILED" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifyOptions {
        VerifyOptions {
            trial_scale: 0.05,
            ..Default::default()
        }
    }

    #[test]
    fn suites_pass_on_a_sample() {
        for r in run_all(&quick()) {
            assert!(r.ok(), "{}: {:?}", r.name, r.failures.first());
        }
    }

    #[test]
    fn same_seed_same_report() {
        let a = render_report(&run_all(&quick()));
        let b = render_report(&run_all(&quick()));
        assert_eq!(a, b);
    }

    #[test]
    fn weight_sign_fault_is_caught() {
        let opts = VerifyOptions {
            fault: Some(Fault::FlipWeightSign),
            trial_scale: 0.1,
            ..Default::default()
        };
        let r = run_named("observability-hyperbolicity", &opts).unwrap();
        assert!(!r.ok());
        assert!(r.failures[0].instance.get("L").is_some());
    }
}
