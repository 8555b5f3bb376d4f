//! Lossless three-generator network: an undamped mode at gamma = 0 and a
//! supercritical Hopf point on the boundary of the damping sweep.

use damplab::bifurcation::{hopf_conditions, track_axis_crossing};
use damplab::grid::{case1, CASE1_GAMMA_RANGE};

fn main() -> damplab::Result<()> {
    let model = case1(0.0);
    let x0 = model.equilibrium.clone().expect("case 1 ships its equilibrium");
    let path = model.damping_path(CASE1_GAMMA_RANGE)?;

    let crossings = track_axis_crossing(&path, &x0, 51)?;
    for c in &crossings {
        println!(
            "crossing: gamma0 = {:.6}, omega0 = {:.6}, boundary = {}",
            c.gamma, c.omega, c.boundary
        );
    }
    let c = crossings.first().expect("case 1 has a crossing at gamma = 0");
    let cert = hopf_conditions(&path, &x0, c.gamma)?;
    println!("omega0^2          = {:.10}", cert.omega0 * cert.omega0);
    println!("unobservable      = {}", cert.unobservable);
    println!("simple            = {}", cert.simple);
    println!("xi'(gamma0)       = {:.6}", cert.eigenvalue_derivative);
    println!("Im(q* M^-1 D' v)  = {:.6}", cert.transversality);
    println!("fd check (rel)    = {:.2e}", cert.derivative_fd_error);
    println!("resonance clear   = {} (k_max = {})", cert.resonance_clear, cert.k_max);
    println!("l1                = {:.4e} ({})", cert.l1, cert.kind);
    Ok(())
}
