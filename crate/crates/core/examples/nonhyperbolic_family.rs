//! Networks with two undamped generators that keep an imaginary pair for any
//! damping on the others, next to the one-undamped small networks that cannot.

use damplab::grid::{build_nonhyperbolic_family, case2, small_n_spectrum_check, GridEquilibrium};
use damplab::linalg;
use damplab::spectral::jacobian_2n;

fn main() -> damplab::Result<()> {
    for n in 2..=6 {
        let tail: Vec<f64> = (0..n - 1).map(|k| 0.5 + k as f64).collect();
        let (m, d, l) = build_nonhyperbolic_family(n, &tail)?;
        let eigs = linalg::eigenvalues(&jacobian_2n(&m, &d, &l)?);
        let beta = (1.0 + 1.0 / n as f64).sqrt();
        let best = eigs.iter().map(|z| (z.re.abs(), (z.im - beta).abs())).fold((f64::INFINITY, 0.0), |a, b| {
            if b.0 + b.1 < a.0 + a.1 { b } else { a }
        });
        println!("n = {n}: beta = {beta:.9}, nearest eigenvalue off by ({:.1e}, {:.1e})", best.0, best.1);
    }

    let model = case2(0.0);
    let eq = GridEquilibrium::at(&model, model.equilibrium.clone().expect("stored equilibrium"));
    println!("two generators, one undamped: no imaginary pair = {}", small_n_spectrum_check(&model, &eq)?);
    Ok(())
}
