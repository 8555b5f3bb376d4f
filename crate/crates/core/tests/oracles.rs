//! Independent reference computations for values the library derives.

use damplab::bifurcation::{
    first_lyapunov_coefficient, first_lyapunov_coefficient_with_steps, fd_steps, hopf_conditions, track_axis_crossing,
    HopfCertificate, HopfKind, DEFAULT_TOL_L1,
};
use damplab::field::{FnField, VectorField};
use damplab::grid::{build_nonhyperbolic_family, case1, case2, ReferencedModel, CASE1_GAMMA_RANGE, CASE2_GAMMA_RANGE};
use damplab::linalg::{self, CMatrix, RMatrix};
use damplab::simulation::{hopf_section, integrate_with, poincare_cycle_search, CycleSearchOptions, IntegrateOptions};
use damplab::spectral::{self, QuadraticPencil};
use damplab::verify;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Roots of the monic polynomial with coefficients `c[0] + c[1] z + ... + z^d`.
fn durand_kerner(c: &[Complex64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    let lead = c[d];
    let p = |z: Complex64| c.iter().rev().fold(cx(0.0, 0.0), |acc, &a| acc * z + a) / lead;
    let radius = 1.0 + c[..d].iter().map(|a| (a / lead).norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..d).map(|k| cx(0.4, 0.9).powu(k as u32) * radius).collect();
    for _ in 0..2000 {
        let prev = z.clone();
        for i in 0..d {
            let denom = (0..d).filter(|&j| j != i).fold(cx(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            let step = p(z[i]) / denom;
            z[i] -= step;
        }
        if z.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15 * radius) {
            break;
        }
    }
    z
}

/// Coefficients of `det(lambda^2 M + lambda D + L)` from its values on a circle.
fn det_polynomial(m: &RMatrix, d: &RMatrix, l: &RMatrix) -> Vec<Complex64> {
    let deg = 2 * m.nrows();
    let pts: Vec<Complex64> = (0..=deg)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / (deg + 1) as f64))
        .collect();
    let vals: Vec<Complex64> = pts
        .iter()
        .map(|&z| {
            let p = linalg::to_complex(m) * z * z + linalg::to_complex(d) * z + linalg::to_complex(l);
            p.determinant()
        })
        .collect();
    let v = DMatrix::from_fn(deg + 1, deg + 1, |i, j| pts[i].powu(j as u32));
    let sol = v.lu().solve(&DVector::from_vec(vals)).unwrap();
    sol.iter().copied().collect()
}

#[test]
fn pencil_roots_match_determinant_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=3 {
        for _ in 0..20 {
            let m = verify::random_spd(&mut rng, n);
            let d = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let l = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let oracle = durand_kerner(&det_polynomial(&m, &d, &l));
            let pencil = QuadraticPencil::new(m, d, l).unwrap();
            let got = spectral::pencil_eigenvalues(&pencil).unwrap();
            let dist = linalg::matching_distance(&got, &oracle);
            assert!(dist < 1e-6, "n = {n}, distance {dist:.3e}");
        }
    }
}

#[test]
fn takagi_values_are_singular_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=6 {
        let a = verify::random_symmetric(&mut rng, n);
        let b = verify::random_symmetric(&mut rng, n);
        let s = CMatrix::from_fn(n, n, |i, j| cx(a[(i, j)], b[(i, j)]));
        let t = spectral::takagi(&s).unwrap();
        let mut sv: Vec<f64> = s.clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in t.sigma.iter().zip(&sv) {
            assert!((x - y).abs() < 1e-12 * sv[0].max(1.0));
        }
    }
}

/// With `M = I`, `D = diag(0, 0, 1.5)` the mode `x = (1, -1, 0)` satisfies
/// `L x = 1.5 x` and `D x = 0`, so `(x, i sqrt(1.5) x)` is an eigenvector.
#[test]
fn case1_axis_pair_from_explicit_mode() {
    let model = case1(0.0);
    let x0 = model.equilibrium.clone().unwrap();
    let sys = model.to_second_order();
    let l = sys.stiffness(&x0);
    let mode = DVector::from_vec(vec![1.0, -1.0, 0.0]);
    assert!((&l * &mode - &mode * 1.5).norm() < 1e-12);
    assert!((sys.damping() * &mode).norm() == 0.0);

    let j = sys.jacobian(&x0).unwrap();
    let w = 1.5f64.sqrt();
    let mut r = DVector::from_element(6, cx(0.0, 0.0));
    for k in 0..3 {
        r[k] = cx(mode[k], 0.0);
        r[k + 3] = cx(0.0, w * mode[k]);
    }
    let resid = linalg::to_complex(&j) * &r - &r * cx(0.0, w);
    assert!(resid.norm() < 1e-12);
}

/// First-order perturbation of a semisimple eigenvalue: the real part of
/// `d lambda / d gamma` is `-x^T D' x / (2 x^T M x)`.
#[test]
fn case1_eigenvalue_derivative_from_perturbation_theory() {
    let model = case1(0.0);
    let x0 = model.equilibrium.clone().unwrap();
    let path = model.damping_path(CASE1_GAMMA_RANGE).unwrap();
    let cert = hopf_conditions(&path, &x0, 0.0).unwrap();
    let mode = DVector::from_vec(vec![1.0, -1.0, 0.0]) / 2f64.sqrt();
    let dprime = RMatrix::from_diagonal(&model.damping_sensitivity.clone().unwrap());
    let expected = -(mode.transpose() * &dprime * &mode)[(0, 0)] / 2.0;
    assert!((cert.eigenvalue_derivative.re - expected).abs() < 1e-8);
    assert!((cert.omega0 - 1.5f64.sqrt()).abs() < 1e-10);
}

/// Closed-form first Lyapunov coefficient of a planar system
/// `x' = -w y + f(x, y)`, `y' = w x + g(x, y)`.
fn planar_coefficient(w: f64, f: &[f64; 7], g: &[f64; 7]) -> f64 {
    // Coefficients of x^2, xy, y^2, x^3, x^2 y, x y^2, y^3.
    let (fxx, fxy, fyy, fxxx, fxyy) = (2.0 * f[0], f[1], 2.0 * f[2], 6.0 * f[3], 2.0 * f[5]);
    let (gxx, gxy, gyy, gxxy, gyyy) = (2.0 * g[0], g[1], 2.0 * g[2], 2.0 * g[4], 6.0 * g[6]);
    (fxxx + fxyy + gxxy + gyyy) / 16.0 + (fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy) / (16.0 * w)
}

fn poly(c: &[f64; 7], x: f64, y: f64) -> f64 {
    c[0] * x * x + c[1] * x * y + c[2] * y * y + c[3] * x * x * x + c[4] * x * x * y + c[5] * x * y * y + c[6] * y * y * y
}

#[test]
fn lyapunov_coefficient_matches_planar_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..25 {
        let w: f64 = rng.gen_range(0.3..3.0);
        let f: [f64; 7] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let g: [f64; 7] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let field = FnField::new(2, move |x: &DVector<f64>| {
            DVector::from_vec(vec![-w * x[1] + poly(&f, x[0], x[1]), w * x[0] + poly(&g, x[0], x[1])])
        });
        let l1 = first_lyapunov_coefficient(&field, &DVector::zeros(2), w).unwrap();
        // Unit-norm eigenvectors scale the planar coefficient by 2 / w.
        let expected = 2.0 * planar_coefficient(w, &f, &g) / w;
        assert!((l1 - expected).abs() < 1e-5 * expected.abs().max(1.0), "w {w}: {l1} vs {expected}");
    }
}

#[test]
fn damped_oscillator_matches_closed_form() {
    let (w, z) = (1.7, 0.15);
    let field = FnField::new(2, move |x: &DVector<f64>| DVector::from_vec(vec![x[1], -w * w * x[0] - 2.0 * z * w * x[1]]));
    let opts = IntegrateOptions {
        rtol: 1e-11,
        atol: 1e-13,
        output_step: Some(0.25),
        ..IntegrateOptions::default()
    };
    let traj = integrate_with(&field, &DVector::from_vec(vec![1.0, 0.0]), (0.0, 30.0), &opts).unwrap();
    let wd = w * (1.0 - z * z).sqrt();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let exact = (-z * w * t).exp() * ((wd * t).cos() + z * w / wd * (wd * t).sin());
        assert!((x[0] - exact).abs() < 1e-9, "t = {t}");
    }
}

/// Hurwitz test on `s^3 + a2 s^2 + a1 s + a0`: a pair crosses the axis where
/// `a2 a1 - a0` changes sign.
fn hurwitz_margin(gamma: f64) -> f64 {
    let model = case2(gamma);
    let x = ReferencedModel::state_of(model.equilibrium.as_ref().unwrap());
    let j = ReferencedModel::new(&model).jacobian(&x);
    let a2 = -j.trace();
    let minor = |p: usize, q: usize| j[(p, p)] * j[(q, q)] - j[(p, q)] * j[(q, p)];
    let a1 = minor(0, 1) + minor(0, 2) + minor(1, 2);
    let a0 = -j.determinant();
    a2 * a1 - a0
}

#[test]
fn case2_crossing_matches_hurwitz_boundary() {
    let (mut lo, mut hi) = CASE2_GAMMA_RANGE;
    assert!(hurwitz_margin(lo).signum() != hurwitz_margin(hi).signum());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hurwitz_margin(mid).signum() == hurwitz_margin(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let model = case2(0.0);
    let path = model.damping_path(CASE2_GAMMA_RANGE).unwrap();
    let crossings = track_axis_crossing(&path, model.equilibrium.as_ref().unwrap(), 41).unwrap();
    assert_eq!(crossings.len(), 1);
    assert!((crossings[0].gamma - lo).abs() < 1e-8, "{} vs {lo}", crossings[0].gamma);
}

#[test]
fn nonhyperbolic_family_mode() {
    for n in 2..=6 {
        let tail: Vec<f64> = (1..n).map(|k| k as f64 * 0.4).collect();
        let (_, d, l) = build_nonhyperbolic_family(n, &tail).unwrap();
        let mut x = DVector::zeros(n + 1);
        x[0] = 1.0;
        x[1] = -1.0;
        let beta2 = 1.0 + 1.0 / n as f64;
        assert!((&l * &x - &x * beta2).norm() < 1e-14);
        assert!((&d * &x).norm() == 0.0);
    }
}

fn check_certificate(c: &HopfCertificate, path_j: &RMatrix) {
    let l0r0 = c.l0.dotc(&c.r0);
    assert!((l0r0 - cx(1.0, 0.0)).norm() <= 1e-10);
    let n = path_j.nrows();
    let mut shifted = linalg::to_complex(path_j);
    for i in 0..n {
        shifted[(i, i)] -= cx(0.0, c.omega0);
    }
    let smin = linalg::singular_values(&shifted).last().copied().unwrap();
    assert!(smin <= 1e-7 * linalg::spectral_norm(path_j));
    assert_eq!(c.kind, HopfKind::classify(c.l1, DEFAULT_TOL_L1));
    assert!(c.derivative_fd_error <= 1e-5, "fd error {}", c.derivative_fd_error);
}

#[test]
fn certificates_are_self_consistent_and_l1_is_step_robust() {
    for (model, range) in [(case1(0.0), CASE1_GAMMA_RANGE), (case2(0.0), CASE2_GAMMA_RANGE)] {
        let x0 = model.equilibrium.clone().unwrap();
        let path = model.damping_path(range).unwrap();
        for cr in track_axis_crossing(&path, &x0, 41).unwrap() {
            let c = hopf_conditions(&path, &x0, cr.gamma).unwrap();
            let j = path.jacobian(c.gamma0, &x0).unwrap();
            check_certificate(&c, &j);

            let analysis = path.analysis_model(c.gamma0, &x0).unwrap();
            let (h2, h3) = fd_steps(&analysis.state);
            let base = first_lyapunov_coefficient_with_steps(analysis.field.as_ref(), &analysis.state, c.omega0, h2, h3).unwrap();
            let half = first_lyapunov_coefficient_with_steps(analysis.field.as_ref(), &analysis.state, c.omega0, h2 / 2.0, h3 / 2.0).unwrap();
            assert!(((half - base) / base).abs() < 0.05, "{}: {base} vs {half}", model.name);
        }
    }
}

#[test]
fn case2_cycle_period_approaches_linear_period() {
    let m0 = case2(0.0);
    let x0 = m0.equilibrium.clone().unwrap();
    let path = m0.damping_path(CASE2_GAMMA_RANGE).unwrap();
    let g0 = track_axis_crossing(&path, &x0, 41).unwrap()[0].gamma;
    let t0 = 2.0 * std::f64::consts::PI / hopf_conditions(&path, &x0, g0).unwrap().omega0;

    let rel = |gamma: f64| {
        let m = case2(gamma);
        let field = ReferencedModel::new(&m);
        let eq = ReferencedModel::state_of(m.equilibrium.as_ref().unwrap());
        let section = hopf_section(&field, &eq).unwrap();
        let mut e = DVector::zeros(field.dim());
        e[0] = 1.0;
        let dir = (&e - &section.normal * section.normal.dot(&e)).normalize();
        let seed = &eq + dir * 0.1;
        let cycle = poincare_cycle_search(&field, &section, &seed, &CycleSearchOptions::default()).unwrap();
        (cycle.period / t0 - 1.0).abs()
    };
    let near = rel(g0 + 1e-3);
    let far = rel(g0 + 1e-2);
    assert!(near < 0.02, "{near}");
    assert!(near < far, "{near} vs {far}");
}
