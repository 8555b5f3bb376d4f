//! Takagi factorization and the rank of `A + iD` under PSD imaginary updates.

use damplab::linalg::{self, c, CMatrix, RMatrix};
use damplab::perturbation::{rank_comparison, rank_monotonicity_holds, PsdPerturbationInstance, TOL_RANK_COMPARE};
use damplab::spectral::takagi;

fn main() -> damplab::Result<()> {
    let s = CMatrix::from_row_slice(3, 3, &[
        c(1.0, 0.5), c(0.2, 0.0), c(0.0, -0.3),
        c(0.2, 0.0), c(-2.0, 1.0), c(0.7, 0.1),
        c(0.0, -0.3), c(0.7, 0.1), c(0.5, 0.0),
    ]);
    let t = takagi(&s)?;
    println!("singular values: {:?}", t.sigma);
    println!("||U S U^T - S||  = {:.2e}", (t.reconstruct() - &s).norm());
    println!("||U^* U - I||    = {:.2e}", (t.u.adjoint() * &t.u - CMatrix::identity(3, 3)).norm());

    // A rank-deficient Laplacian with damping blind to the ones vector.
    let a = RMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
    let d = RMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let e = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0]));
    let cmp = rank_comparison(&a, &d, &e, TOL_RANK_COMPARE);
    let inst = PsdPerturbationInstance::new(a, d, e)?;
    println!("rank(A + iD) = {}, rank(A + iD + iE) = {}, holds = {}", cmp.base, cmp.perturbed, rank_monotonicity_holds(&inst));

    // Without symmetry the rank can drop.
    let r2 = 2f64.sqrt();
    let bad = CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(r2, 0.0), c(-r2, 0.0), c(-1.0, 0.0)]);
    let e = RMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let cmp = rank_comparison(&linalg::real_part(&bad), &linalg::imag_part(&bad), &e, TOL_RANK_COMPARE);
    println!("unsymmetric input: rank {} -> {}", cmp.base, cmp.perturbed);
    Ok(())
}
