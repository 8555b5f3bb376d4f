//! The unstable cycle born at the subcritical Hopf point of the two-generator
//! model: orbits started inside it decay, orbits started outside run away.

use damplab::field::VectorField;
use damplab::grid::{case2, ReferencedModel};
use damplab::simulation::{
    classify_orbit, hopf_section, integrate_with, poincare_cycle_search, CycleSearchOptions, IntegrateOptions,
};
use nalgebra::DVector;

fn main() -> damplab::Result<()> {
    let model = case2(0.25);
    let field = ReferencedModel::new(&model);
    let x0 = ReferencedModel::state_of(model.equilibrium.as_ref().expect("stored equilibrium"));
    let section = hopf_section(&field, &x0)?;

    // Seeds along the first angle, projected into the section.
    let mut e = DVector::zeros(field.dim());
    e[0] = 1.0;
    let dir = (&e - &section.normal * section.normal.dot(&e)).normalize();

    let cycle = poincare_cycle_search(&field, &section, &(&x0 + &dir * 0.3), &CycleSearchOptions::default())?;
    println!(
        "cycle: period {:.5}, amplitude {:.5}, radial multiplier {:.3} ({:?})",
        cycle.period, cycle.amplitude, cycle.radial_multiplier, cycle.stability_hint
    );

    let opts = IntegrateOptions {
        output_step: Some(0.05),
        escape: Some((x0.clone(), 10.0)),
        ..IntegrateOptions::default()
    };
    for (label, scale) in [("inside", 0.5), ("outside", 1.5)] {
        let start = &cycle.anchor_state + (&cycle.anchor_state - &x0) * (scale - 1.0);
        let traj = integrate_with(&field, &start, (0.0, 200.0), &opts)?;
        println!(
            "{label:>7} seed: {:?} (escaped = {}, t_end = {:.2})",
            classify_orbit(&traj, &x0),
            traj.escaped,
            traj.times.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
