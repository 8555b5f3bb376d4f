//! Quadratic pencil `lambda^2 M + lambda D + L` against the first-order Jacobian.

use damplab::linalg::{self, RMatrix};
use damplab::spectral::{classify_spectrum, jacobian_2n, pencil_eigenvalues, QuadraticPencil, DEFAULT_TOL_AXIS};

fn main() -> damplab::Result<()> {
    let m = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, 1.0]));
    let d = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.3, 0.0]));
    let l = RMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);

    let pencil = QuadraticPencil::new(m.clone(), d.clone(), l.clone())?;
    let eigs = pencil_eigenvalues(&pencil)?;
    let jac = linalg::eigenvalues(&jacobian_2n(&m, &d, &l)?);
    println!("{:>28}  {:>10}", "lambda", "residual");
    for &z in &eigs {
        println!("{:>13.8} {:>+13.8}i  {:>10.2e}", z.re, z.im, pencil.relative_residual(z));
    }
    println!("matching distance to Jacobian spectrum: {:.2e}", linalg::matching_distance(&eigs, &jac));

    let report = classify_spectrum(&jac, DEFAULT_TOL_AXIS);
    println!("inertia (n-, n0, n+) = {:?}", report.inertia());
    println!("imaginary-axis set: {:?}", report.axis_set);
    Ok(())
}
