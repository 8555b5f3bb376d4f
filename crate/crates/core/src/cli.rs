//! Batch front end behind the `damplab` binary.
//!
//! Exit codes: 0 success, 1 load or numerical failure, 2 analysis succeeded
//! but the equilibrium is not hyperbolic, 3 a property suite failed.
//!
//! Machine outputs written under `--out`:
//! - `spectrum.json`
//! - `locus.csv` with columns `gamma,pair,re,im` and `certificates.json`
//! - `trajectory.csv` (`t,x1..xm,event`), `summary.json` and `cycle.json`
//! - `verify.txt` and `failures.json`
//! - `referenced.json`

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::bifurcation::{hopf_conditions_with, track_axis_crossing, HopfCertificate, HopfOptions, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{self, GridEquilibrium, PowerGridModel, ReferencedModel};
use crate::linalg;
use crate::simulation::{self, CycleSearchOptions, IntegrateOptions, OrbitClass, DEFAULT_ATOL, DEFAULT_RTOL};
use crate::spectral::{self, SpectrumReport, DEFAULT_TOL_AXIS};
use crate::stability::{self, DEFAULT_TOL_OBS};
use crate::verify::{self, Fault, VerifyOptions, DEFAULT_SEED};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NONHYPERBOLIC: u8 = 2;
pub const EXIT_PROPERTY: u8 = 3;

pub const DEFAULT_GAMMA_RANGE: GammaRange = GammaRange {
    min: 0.0,
    max: 1.0,
    samples: DEFAULT_SAMPLES,
};

#[derive(Debug, Parser)]
#[command(name = "damplab", version, about = "Hyperbolicity and Hopf analysis of damped swing-equation models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jacobian spectrum, inertia and hyperbolicity at the equilibrium.
    Spectrum(SpectrumArgs),
    /// Track imaginary-axis crossings over a damping sweep and certify each.
    HopfScan(HopfScanArgs),
    /// Integrate the referenced model and classify the orbit.
    Simulate(SimulateArgs),
    /// Run the seeded randomized property suites.
    Verify(VerifyArgs),
    /// Export the referenced (2n-1)-dimensional model at the equilibrium.
    Reduce(ReduceArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for machine-readable files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_AXIS)]
    pub tol_axis: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_OBS)]
    pub tol_obs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRange {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl std::str::FromStr for GammaRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected a:b:n, got {s:?}"));
        };
        let min: f64 = a.trim().parse().map_err(|e| format!("bad lower bound {a:?}: {e}"))?;
        let max: f64 = b.trim().parse().map_err(|e| format!("bad upper bound {b:?}: {e}"))?;
        let samples: usize = n.trim().parse().map_err(|e| format!("bad sample count {n:?}: {e}"))?;
        if !(min.is_finite() && max.is_finite()) || min >= max {
            return Err(format!("need a < b, got {min} and {max}"));
        }
        if samples < 2 {
            return Err(format!("need at least 2 samples, got {samples}"));
        }
        Ok(Self { min, max, samples })
    }
}

impl std::fmt::Display for GammaRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.samples)
    }
}

#[derive(Debug, Args)]
pub struct HopfScanArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_GAMMA_RANGE)]
    pub gamma_range: GammaRange,
    #[arg(long, default_value_t = DEFAULT_TOL_AXIS)]
    pub tol_axis: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Comma-separated absolute state: either `delta_1..delta_n,omega_1..omega_n`
    /// or referenced `psi_1..psi_{n-1},omega_1..omega_n`. Defaults to the
    /// equilibrium with `psi_1` displaced by 0.05.
    #[arg(long, allow_hyphen_values = true)]
    pub initial_state: Option<String>,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    /// Spacing of recorded samples; 0 records every accepted step.
    #[arg(long, default_value_t = 0.05)]
    pub output_step: f64,
    #[arg(long, default_value_t = DEFAULT_RTOL)]
    pub rtol: f64,
    #[arg(long, default_value_t = DEFAULT_ATOL)]
    pub atol: f64,
    /// Stop when the state leaves this ball around the equilibrium.
    #[arg(long, default_value_t = 10.0)]
    pub escape_radius: f64,
    /// Also search for a periodic orbit from the initial state.
    #[arg(long)]
    pub cycle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    FlipWeightSign,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Multiplies every suite's trial count.
    #[arg(long, default_value_t = 1.0)]
    pub trial_scale: f64,
    /// Run a single suite by name.
    #[arg(long)]
    pub suite: Option<String>,
    /// Deliberately break the harness to check that suites can fail.
    #[arg(long, value_enum)]
    pub inject_fault: Option<FaultArg>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_AXIS)]
    pub tol_axis: f64,
}

/// Parse arguments, set up logging from `DAMPLAB_LOG` and run.
pub fn main_from_env() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("DAMPLAB_LOG"))
        .format_timestamp(None)
        .try_init();
    // Usage errors exit 1 so that 2 keeps meaning "not hyperbolic".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK });
        }
    };
    let mut stdout = std::io::stdout().lock();
    ExitCode::from(run(&cli, &mut stdout))
}

/// Run a parsed command, writing the report to `out`, and return the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> u8 {
    let result = match &cli.command {
        Command::Spectrum(a) => cmd_spectrum(a, out),
        Command::HopfScan(a) => cmd_hopf_scan(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Reduce(a) => cmd_reduce(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::TrackingAmbiguity { .. } = e {
                eprintln!("hint: pass a finer --gamma-range, for example a:b:{}", 4 * DEFAULT_SAMPLES);
            }
            EXIT_FAILURE
        }
    }
}

/// Write `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e)
}

/// Load a model and solve for its equilibrium, starting from the stored
/// equilibrium or angle guess when present.
pub fn load_with_equilibrium(path: &Path) -> Result<(PowerGridModel, GridEquilibrium)> {
    let model = grid::load_model(path).map_err(|e| match e {
        Error::Io(err) => Error::Io(std::io::Error::new(err.kind(), format!("{}: {err}", path.display()))),
        e => e,
    })?;
    let guess = model
        .equilibrium
        .clone()
        .or_else(|| model.delta_guess.clone())
        .unwrap_or_else(|| DVector::zeros(model.n()));
    let eq = grid::solve_equilibrium(&model, &guess)?;
    Ok((model, eq))
}

fn fmt_c(z: Complex64) -> String {
    format!("{:+.9} {:+.9}i", z.re, z.im)
}

#[derive(Debug, Serialize)]
struct SpectrumOutput {
    gamma: f64,
    tol_axis: f64,
    tol_obs: f64,
    delta0: Vec<f64>,
    in_omega: bool,
    full: SpectrumReport,
    referenced: SpectrumReport,
    hyperbolic: bool,
    witnesses: Vec<(Complex64, Vec<Complex64>)>,
}

pub fn cmd_spectrum(args: &SpectrumArgs, out: &mut dyn Write) -> Result<u8> {
    let (model, eq) = load_with_equilibrium(&args.common.model)?;
    let model = model.at_gamma(args.gamma);
    let sys = model.to_second_order();
    let full = spectral::classify_spectrum(&linalg::eigenvalues(&sys.jacobian(&eq.delta0)?), args.tol_axis);
    let red = ReferencedModel::new(&model);
    let referenced = spectral::classify_spectrum(
        &linalg::eigenvalues(&red.jacobian(&ReferencedModel::state_of(&eq.delta0))),
        args.tol_axis,
    );
    // The rotational zero mode is removed by the referenced model.
    let hyperbolic = referenced.is_hyperbolic();

    let minv = sys.inertia_inv();
    let a = minv * sys.stiffness(&eq.delta0);
    let verdict = stability::observability_test(&a, &(minv * sys.damping()), args.tol_obs)?;
    let zero_tol = 1e-8 * linalg::spectral_norm(&a).max(1.0);
    let witnesses: Vec<_> = verdict
        .witnesses
        .iter()
        .filter(|w| w.eigenvalue.norm() > zero_tol)
        .map(|w| (w.eigenvalue, w.vector.iter().copied().collect::<Vec<_>>()))
        .collect();

    let w = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "model: {} (n = {}), gamma = {}", model.name, model.n(), args.gamma)?;
        let d: Vec<String> = eq.delta0.iter().map(|x| format!("{x:.9}")).collect();
        writeln!(out, "equilibrium delta = [{}], in Omega = {}", d.join(", "), eq.in_omega)?;
        writeln!(out, "Jacobian eigenvalues ({}):", full.eigenvalues.len())?;
        for &z in &full.eigenvalues {
            writeln!(out, "  {}", fmt_c(z))?;
        }
        let (l, z, r) = full.inertia();
        writeln!(out, "inertia (n-, n0, n+) = ({l}, {z}, {r})")?;
        let (l, z, r) = referenced.inertia();
        writeln!(out, "referenced inertia (n-, n0, n+) = ({l}, {z}, {r})")?;
        if witnesses.is_empty() {
            writeln!(out, "observability: no unobservable nonzero mode")?;
        }
        for (mu, v) in &witnesses {
            let v: Vec<String> = v.iter().map(|z| format!("{:.6}", z.re)).collect();
            writeln!(out, "unobservable mode: mu = {:.9}, x = [{}]", mu.re, v.join(", "))?;
        }
        writeln!(out, "hyperbolic: {}", if hyperbolic { "yes" } else { "no" })
    };
    w(out).map_err(io)?;
    if let Some(dir) = &args.common.out {
        write_json(
            dir,
            "spectrum.json",
            &SpectrumOutput {
                gamma: args.gamma,
                tol_axis: args.tol_axis,
                tol_obs: args.tol_obs,
                delta0: eq.delta0.iter().copied().collect(),
                in_omega: eq.in_omega,
                full,
                referenced,
                hyperbolic,
                witnesses,
            },
        )?;
    }
    Ok(if hyperbolic { EXIT_OK } else { EXIT_NONHYPERBOLIC })
}

/// Eigenvalues with `Im >= 0` of the referenced Jacobian on every sample,
/// ordered by imaginary part, as `gamma,pair,re,im` rows.
fn locus_csv(model: &PowerGridModel, eq: &GridEquilibrium, range: &GammaRange) -> String {
    let mut s = String::from("gamma,pair,re,im\n");
    let x = ReferencedModel::state_of(&eq.delta0);
    for i in 0..range.samples {
        let g = range.min + (range.max - range.min) * i as f64 / (range.samples - 1) as f64;
        let j = ReferencedModel::new(&model.at_gamma(g)).jacobian(&x);
        let mut upper: Vec<Complex64> = linalg::eigenvalues(&j).into_iter().filter(|z| z.im >= 0.0).collect();
        upper.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        for (k, z) in upper.iter().enumerate() {
            s.push_str(&format!("{g:.12e},{k},{:.12e},{:.12e}\n", z.re, z.im));
        }
    }
    s
}

pub fn cmd_hopf_scan(args: &HopfScanArgs, out: &mut dyn Write) -> Result<u8> {
    let (model, eq) = load_with_equilibrium(&args.common.model)?;
    let range = args.gamma_range;
    let certificates: Vec<HopfCertificate> = if model.damping_sensitivity.is_none() {
        writeln!(out, "model has constant damping; nothing to scan").map_err(io)?;
        Vec::new()
    } else {
        let path = model.damping_path((range.min, range.max))?;
        let opts = HopfOptions {
            tol_axis: args.tol_axis,
            ..HopfOptions::default()
        };
        track_axis_crossing(&path, &eq.delta0, range.samples)?
            .iter()
            .map(|c| hopf_conditions_with(&path, &eq.delta0, c.gamma, &opts))
            .collect::<Result<_>>()?
    };
    writeln!(out, "gamma range {range}: {} crossing(s)", certificates.len()).map_err(io)?;
    for c in &certificates {
        writeln!(
            out,
            "gamma0 = {:.6}  omega0 = {:.6}  transversality = {:.6}  simple = {}  resonance clear = {}  l1 = {:.4e}  {}",
            c.gamma0, c.omega0, c.transversality, c.simple, c.resonance_clear, c.l1, c.kind
        )
        .map_err(io)?;
    }
    if let Some(dir) = &args.common.out {
        write_atomic(dir, "locus.csv", locus_csv(&model, &eq, &range).as_bytes())?;
        write_json(dir, "certificates.json", &certificates)?;
    }
    Ok(EXIT_OK)
}

/// Parse `--initial-state` into referenced coordinates.
pub fn parse_initial_state(text: &str, n: usize) -> Result<DVector<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::PreconditionViolated(format!("bad --initial-state: {e}")))?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::PreconditionViolated("initial state must be finite".into()));
    }
    if values.len() == 2 * n - 1 {
        Ok(DVector::from_vec(values))
    } else if values.len() == 2 * n {
        let delta = DVector::from_column_slice(&values[..n]);
        let mut s = ReferencedModel::state_of(&delta);
        s.rows_mut(n - 1, n).copy_from_slice(&values[n..]);
        Ok(s)
    } else {
        Err(Error::DimensionMismatch(format!(
            "--initial-state has {} values, expected {} or {}",
            values.len(),
            2 * n - 1,
            2 * n
        )))
    }
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    gamma: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
    initial_state: Vec<f64>,
    equilibrium: Vec<f64>,
    samples: usize,
    crossings: usize,
    accepted_steps: usize,
    rejected_steps: usize,
    escaped: bool,
    classification: OrbitClass,
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<u8> {
    let (model, eq) = load_with_equilibrium(&args.common.model)?;
    let model = model.at_gamma(args.gamma);
    let n = model.n();
    let field = ReferencedModel::new(&model);
    let center = ReferencedModel::state_of(&eq.delta0);
    let x0 = match &args.initial_state {
        Some(s) => parse_initial_state(s, n)?,
        None => {
            let mut x = center.clone();
            x[0] += 0.05;
            x
        }
    };
    let section = simulation::hopf_section(&field, &center).ok();
    let opts = IntegrateOptions {
        rtol: args.rtol,
        atol: args.atol,
        output_step: (args.output_step > 0.0).then_some(args.output_step),
        section: section.clone(),
        escape: Some((center.clone(), args.escape_radius)),
        ..IntegrateOptions::default()
    };
    let traj = simulation::integrate_with(&field, &x0, (0.0, args.t_end), &opts)?;
    let classification = simulation::classify_orbit(&traj, &center);
    let summary = SimulationSummary {
        gamma: args.gamma,
        t_end: args.t_end,
        rtol: args.rtol,
        atol: args.atol,
        initial_state: x0.iter().copied().collect(),
        equilibrium: center.iter().copied().collect(),
        samples: traj.times.len(),
        crossings: traj.event_log.len(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        escaped: traj.escaped,
        classification,
    };
    writeln!(
        out,
        "gamma = {}, {} samples, {} section crossings, escaped = {}, classification = {:?}",
        args.gamma, summary.samples, summary.crossings, traj.escaped, classification
    )
    .map_err(io)?;

    let cycle = match (&section, args.cycle) {
        (Some(sec), true) => match simulation::poincare_cycle_search(&field, sec, &x0, &CycleSearchOptions::default()) {
            Ok(c) => {
                writeln!(
                    out,
                    "cycle: period = {:.6}, amplitude = {:.6}, radial multiplier = {:.4}, {:?}",
                    c.period, c.amplitude, c.radial_multiplier, c.stability_hint
                )
                .map_err(io)?;
                Some(json!(c))
            }
            Err(e) => {
                writeln!(out, "cycle: not found ({e})").map_err(io)?;
                Some(json!({ "error": e.to_string() }))
            }
        },
        (None, true) => {
            writeln!(out, "cycle: no complex eigenvalue pair to define a section").map_err(io)?;
            None
        }
        _ => None,
    };

    if let Some(dir) = &args.common.out {
        let mut csv = Vec::new();
        simulation::write_trajectory_csv(&traj, &mut csv)?;
        write_atomic(dir, "trajectory.csv", &csv)?;
        write_json(dir, "summary.json", &summary)?;
        if let Some(c) = cycle {
            write_json(dir, "cycle.json", &c)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<u8> {
    let opts = VerifyOptions {
        seed: args.seed,
        trial_scale: args.trial_scale,
        fault: args.inject_fault.map(|f| match f {
            FaultArg::FlipWeightSign => Fault::FlipWeightSign,
        }),
    };
    let results = match &args.suite {
        Some(name) => vec![verify::run_named(name, &opts)
            .ok_or_else(|| Error::PreconditionViolated(format!("unknown suite {name:?}")))?],
        None => verify::run_all(&opts),
    };
    let report = format!("seed {}\n{}", args.seed, verify::render_report(&results));
    out.write_all(report.as_bytes()).map_err(io)?;
    let failures: Vec<_> = results.iter().flat_map(|r| r.failures.iter()).collect();
    for r in results.iter().filter(|r| !r.ok()) {
        let f = &r.failures[0];
        writeln!(out, "first failure in {} (trial {}): {}", r.name, f.trial, f.detail).map_err(io)?;
        writeln!(out, "{}", serde_json::to_string(f)?).map_err(io)?;
    }
    if let Some(dir) = &args.out {
        write_atomic(dir, "verify.txt", report.as_bytes())?;
        write_json(dir, "failures.json", &failures)?;
    }
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_PROPERTY })
}

pub fn cmd_reduce(args: &ReduceArgs, out: &mut dyn Write) -> Result<u8> {
    let (model, eq) = load_with_equilibrium(&args.common.model)?;
    let model = model.at_gamma(args.gamma);
    let check = grid::referenced_spectrum_check(&model, &eq)?;
    let red = ReferencedModel::new(&model);
    let state = ReferencedModel::state_of(&eq.delta0);
    let j = red.jacobian(&state);
    writeln!(
        out,
        "referenced model: dimension {}, inertia full {:?}, reduced {:?}, spectrum mismatch {:.3e}",
        red.dim(),
        check.inertia_full,
        check.inertia_reduced,
        check.mismatch
    )
    .map_err(io)?;
    if let Some(dir) = &args.common.out {
        let rows: Vec<Vec<f64>> = (0..j.nrows()).map(|i| j.row(i).iter().copied().collect()).collect();
        let doc = json!({
            "gamma": args.gamma,
            "dimension": red.dim(),
            "state": state.as_slice(),
            "jacobian": rows,
            "eigenvalues": spectral::classify_spectrum(&check.reduced.eigenvalues, args.tol_axis).eigenvalues,
            "inertia_full": check.inertia_full,
            "inertia_reduced": check.inertia_reduced,
            "mismatch": check.mismatch,
        });
        write_json(dir, "referenced.json", &doc)?;
    }
    Ok(EXIT_OK)
}
