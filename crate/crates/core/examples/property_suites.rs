//! A short run of the randomized property suites with a fixed seed.

use damplab::verify::{render_report, run_all, VerifyOptions};

fn main() {
    let opts = VerifyOptions {
        seed: 7,
        trial_scale: 0.1,
        ..VerifyOptions::default()
    };
    let results = run_all(&opts);
    print!("{}", render_report(&results));
    for r in results.iter().filter(|r| !r.ok()) {
        println!("{}: {}", r.name, r.failures[0].detail);
    }
}
