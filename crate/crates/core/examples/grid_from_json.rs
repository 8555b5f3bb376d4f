//! Loading a reduced network from JSON and solving for its equilibrium.

use damplab::grid::{parse_model, solve_equilibrium};
use damplab::spectral::DEFAULT_TOL_AXIS;

const MODEL: &str = r#"{
  "name": "three-bus",
  "n": 3,
  "Y": [
    {"from": 1, "to": 2, "re": 0.0, "im": 2.0},
    {"from": 2, "to": 3, "re": 0.0, "im": 1.5},
    {"from": 1, "to": 3, "re": 0.0, "im": 1.0},
    {"from": 1, "to": 1, "re": 0.0, "im": -3.0},
    {"from": 2, "to": 2, "re": 0.0, "im": -3.5},
    {"from": 3, "to": 3, "re": 0.0, "im": -2.5}
  ],
  "V": [1.02, 1.0, 0.98],
  "Pm": [0.5, -0.2, -0.3],
  "inertia": [2.0, 1.5, 1.0],
  "damping": [0.4, 0.0, 0.2]
}"#;

fn main() -> damplab::Result<()> {
    let model = parse_model(MODEL)?;
    let eq = solve_equilibrium(&model, &nalgebra::DVector::zeros(model.n()))?;
    println!("{}: lossless = {}", model.name, model.is_lossless());
    println!(
        "delta0 = {:.6?}, residual {:.2e}, {} iterations, in Omega = {} (margin {:.4})",
        eq.delta0.as_slice(),
        eq.residual,
        eq.iterations,
        eq.in_omega,
        eq.omega_margin
    );
    let report = model.to_second_order().spectrum(&eq.delta0, DEFAULT_TOL_AXIS)?;
    println!("inertia (n-, n0, n+) = {:?}", report.inertia());
    println!("nonzero axis eigenvalues: {:?}", report.nonzero_axis_set());

    match parse_model(&MODEL.replace("\"V\": [1.02", "\"V\": [-1.02")) {
        Err(e) => println!("bad file: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
