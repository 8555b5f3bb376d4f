//! More damping never adds imaginary-axis eigenvalues when everything is
//! symmetric, and can when the stiffness is not.

use damplab::linalg::RMatrix;
use damplab::stability::{monotonicity_compare, monotonicity_compare_unchecked, SecondOrderSystem};
use nalgebra::DVector;

fn main() -> damplab::Result<()> {
    let i3 = RMatrix::identity(3, 3);
    let l = RMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 1.0, -0.5, -0.5, -0.5, 1.0]);
    let x0 = DVector::zeros(3);
    let d_i = RMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.5]));
    let d_ii = RMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.0, 1.5]));
    let r = monotonicity_compare(
        &SecondOrderSystem::linear(i3.clone(), d_i, l.clone())?,
        &SecondOrderSystem::linear(i3, d_ii, l)?,
        &x0,
    )?;
    println!("symmetric: C_I = {:?}", r.c_i);
    println!("           C_II = {:?}, contained = {}", r.c_ii, r.subset_holds);

    let i2 = RMatrix::identity(2, 2);
    let l = RMatrix::from_row_slice(2, 2, &[2.0, 2f64.sqrt(), -(2f64.sqrt()), 0.0]);
    let d_i = RMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
    let s_i = SecondOrderSystem::linear(i2.clone(), d_i, l.clone())?;
    let s_ii = SecondOrderSystem::linear(i2.clone(), i2, l)?;
    if let Err(e) = monotonicity_compare(&s_i, &s_ii, &DVector::zeros(2)) {
        println!("unsymmetric stiffness rejected: {e}");
    }
    let r = monotonicity_compare_unchecked(&s_i, &s_ii, &DVector::zeros(2))?;
    println!("unchecked: C_I = {:?}, C_II = {:?}, contained = {}", r.c_i, r.c_ii, r.subset_holds);
    Ok(())
}
