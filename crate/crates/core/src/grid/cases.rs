use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;

use super::PowerGridModel;
use crate::linalg::RMatrix;

pub const CASE1_GAMMA_RANGE: (f64, f64) = (0.0, 0.5);
pub const CASE2_GAMMA_RANGE: (f64, f64) = (0.1, 0.3);

/// Lossless three-generator network with `Y12 = Y13 = 2 Y23 = i`, the first
/// two generators damped by `gamma`, the third by 1.5.
///
/// Diagonal admittances are minus the row sums, so `theta_jj = -pi/2`.
pub fn case1(gamma: f64) -> PowerGridModel {
    let lines = [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 0.5)];
    let mut y = RMatrix::zeros(3, 3);
    let mut theta = RMatrix::zeros(3, 3);
    for (j, k, b) in lines {
        for (a, c) in [(j, k), (k, j)] {
            y[(a, c)] = b;
            theta[(a, c)] = FRAC_PI_2;
            y[(a, a)] += b;
            theta[(a, a)] = -FRAC_PI_2;
        }
    }
    let s3 = 3f64.sqrt();
    let mut m = PowerGridModel::new(
        y,
        theta,
        DVector::from_element(3, 1.0),
        DVector::from_vec(vec![-s3, s3 / 2.0, s3 / 2.0]),
        DVector::from_element(3, 1.0),
        DVector::from_vec(vec![0.0, 0.0, 1.5]),
        1.0,
    )
    .expect("case 1 is a valid model");
    m.name = "case1".into();
    m.damping_sensitivity = Some(DVector::from_vec(vec![1.0, 1.0, 0.0]));
    m.equilibrium = Some(DVector::from_vec(vec![0.0, PI / 3.0, PI / 3.0]));
    m.delta_guess = m.equilibrium.clone();
    m.damping = m.damping_at(gamma);
    m
}

/// Lossy two-generator network with `Y12 = -1 + 5.7978 i`, damping
/// `(gamma, 1)`. Diagonal admittances are taken as zero and the resulting
/// constant power mismatch at the equilibrium `(1.4905, 0)` is moved into
/// `pm` (see `absorbed_offset`).
pub fn case2(gamma: f64) -> PowerGridModel {
    let yc = Complex64::new(-1.0, 5.7978);
    let mut y = RMatrix::zeros(2, 2);
    let mut theta = RMatrix::zeros(2, 2);
    for (a, c) in [(0, 1), (1, 0)] {
        y[(a, c)] = yc.norm();
        theta[(a, c)] = yc.arg();
    }
    let mut m = PowerGridModel::new(
        y,
        theta,
        DVector::from_element(2, 1.0),
        DVector::from_vec(vec![6.6991, -4.8593]),
        DVector::from_element(2, 1.0),
        DVector::from_vec(vec![0.0, 1.0]),
        1.0,
    )
    .expect("case 2 is a valid model");
    m.name = "case2".into();
    let eq = DVector::from_vec(vec![1.4905, 0.0]);
    m.absorb_offset(&eq);
    m.damping_sensitivity = Some(DVector::from_vec(vec![1.0, 0.0]));
    m.equilibrium = Some(eq.clone());
    m.delta_guess = Some(eq);
    m.damping = m.damping_at(gamma);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case2_offsets_are_close_to_one() {
        let m = case2(0.2);
        let off = m.absorbed_offset.unwrap();
        assert!((off[0] - 1.0).abs() < 1e-3 && (off[1] - 1.0).abs() < 1e-3);
        assert_eq!(m.damping.as_slice(), &[0.2, 1.0]);
    }

    #[test]
    fn case1_damping_follows_gamma() {
        assert_eq!(case1(0.3).damping.as_slice(), &[0.3, 0.3, 1.5]);
    }
}
