//! Removing the rotational zero eigenvalue with angles relative to the last generator.

use damplab::field::VectorField;
use damplab::grid::{case1, referenced_spectrum_check, GridEquilibrium, ReferencedModel};

fn main() -> damplab::Result<()> {
    let model = case1(0.1);
    let eq = GridEquilibrium::at(&model, model.equilibrium.clone().expect("stored equilibrium"));
    let check = referenced_spectrum_check(&model, &eq)?;
    let red = ReferencedModel::new(&model);
    println!("state dimension {} -> {}", 2 * model.n(), red.dim());
    println!("full inertia       {:?}", check.inertia_full);
    println!("referenced inertia {:?}", check.inertia_reduced);
    println!("spectrum mismatch  {:.2e}", check.mismatch);
    for z in &check.reduced.eigenvalues {
        println!("  {:+.8} {:+.8}i", z.re, z.im);
    }
    Ok(())
}
