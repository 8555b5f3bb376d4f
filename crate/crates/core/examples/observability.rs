//! Undamped modes of a lossless grid found by an observability test, and the
//! generator whose damping removes them.

use damplab::grid::{apply_repair, case1, damping_repair_suggestion, lossless_imaginary_criterion, GridEquilibrium, DEFAULT_D_REPAIR};

fn main() -> damplab::Result<()> {
    let model = case1(0.0);
    let eq = GridEquilibrium::at(&model, model.equilibrium.clone().expect("stored equilibrium"));
    let crit = lossless_imaginary_criterion(&model, &eq)?;
    println!("imaginary pair: {}", crit.imaginary_pair_exists);
    for z in &crit.axis_eigenvalues {
        println!("  axis eigenvalue {:+.9}i", z.im);
    }
    for w in &crit.witnesses {
        let v: Vec<String> = w.vector.iter().map(|z| format!("{:+.4}", z.re)).collect();
        println!("  unobservable mode mu = {:.6}, x = [{}]", w.eigenvalue.re, v.join(", "));
    }

    let idx = damping_repair_suggestion(&model, &crit.witnesses)?;
    println!("damp generator(s) {:?} with d = {}", idx.iter().map(|j| j + 1).collect::<Vec<_>>(), DEFAULT_D_REPAIR);
    let repaired = apply_repair(&model, &idx, DEFAULT_D_REPAIR);
    let after = lossless_imaginary_criterion(&repaired, &eq)?;
    println!("after repair: imaginary pair = {}", after.imaginary_pair_exists);
    Ok(())
}
