//! Lossy two-generator network: a subcritical Hopf point inside the sweep.

use damplab::bifurcation::{hopf_conditions, track_axis_crossing};
use damplab::grid::{case2, solve_equilibrium, CASE2_GAMMA_RANGE};

fn main() -> damplab::Result<()> {
    let model = case2(0.0);
    let eq = solve_equilibrium(&model, &nalgebra::DVector::from_vec(vec![1.4, 0.0]))?;
    println!(
        "equilibrium delta = ({:.6}, {:.6}), in Omega = {}, margin = {:.4}",
        eq.delta0[0], eq.delta0[1], eq.in_omega, eq.omega_margin
    );
    if let Some(off) = &model.absorbed_offset {
        println!("absorbed Pm offset = ({:.4}, {:.4})", off[0], off[1]);
    }

    let path = model.damping_path(CASE2_GAMMA_RANGE)?;
    for c in track_axis_crossing(&path, &eq.delta0, 41)? {
        let cert = hopf_conditions(&path, &eq.delta0, c.gamma)?;
        println!("gamma0 = {:.6}, omega0 = {:.6}", cert.gamma0, cert.omega0);
        println!("  xi' = {:.6}, transversality = {:.6}", cert.eigenvalue_derivative, cert.transversality);
        println!("  simple = {}, resonance clear = {}", cert.simple, cert.resonance_clear);
        println!("  l1 = {:.4} ({})", cert.l1, cert.kind);
    }
    Ok(())
}
