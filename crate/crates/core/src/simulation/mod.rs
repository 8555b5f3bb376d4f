//! Time integration with the Dormand-Prince 5(4) pair, Poincare sections,
//! return-map cycle search and orbit classification.

mod cycle;

pub use cycle::{
    hopf_section, poincare_cycle_search, refine_cycle_shooting, CycleSearchOptions, LimitCycleEstimate, StabilityHint,
    TOL_CYCLE,
};

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::VectorField;

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-10;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

type V = DVector<f64>;

/// Hyperplane `normal . (x - anchor) = 0`, crossed in the sign of `direction`.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareSection {
    pub normal: V,
    pub anchor: V,
    /// `+1` or `-1`: only crossings where `normal . x` increases (decreases) count.
    pub direction: f64,
}

impl PoincareSection {
    pub fn new(normal: V, anchor: V, direction: f64) -> Result<Self> {
        if normal.len() != anchor.len() {
            return Err(Error::DimensionMismatch("section normal and anchor differ in length".into()));
        }
        let nn = normal.norm();
        if !(nn > 0.0 && nn.is_finite()) {
            return Err(Error::PreconditionViolated("section normal must be nonzero".into()));
        }
        Ok(Self {
            normal: normal / nn,
            anchor,
            direction: if direction < 0.0 { -1.0 } else { 1.0 },
        })
    }

    pub fn value(&self, x: &V) -> f64 {
        self.normal.dot(&(x - &self.anchor))
    }

    /// Orthogonal projection onto the hyperplane.
    pub fn project(&self, x: &V) -> V {
        x - &self.normal * self.value(x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionCrossing {
    pub time: f64,
    pub state: V,
    pub direction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<V>,
    pub event_log: Vec<SectionCrossing>,
    /// Integration stopped because the state left the escape ball.
    pub escaped: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl TrajectoryRecord {
    pub fn last_state(&self) -> Option<&V> {
        self.states.last()
    }
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Record on a uniform grid (dense output) instead of at every step.
    pub output_step: Option<f64>,
    pub section: Option<PoincareSection>,
    /// Stop after this many section crossings.
    pub stop_after_crossings: Option<usize>,
    /// Stop once `|x - center| > radius`.
    pub escape: Option<(V, f64)>,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            output_step: None,
            section: None,
            stop_after_crossings: None,
            escape: None,
            max_steps: 10_000_000,
        }
    }
}

struct Step {
    y1: V,
    k7: V,
    err: f64,
    rcont: [V; 5],
}

fn dp_step(field: &dyn VectorField, y: &V, k1: &V, h: f64, rtol: f64, atol: f64) -> Step {
    let k2 = field.eval(&(y + k1 * (h * A21)));
    let k3 = field.eval(&(y + (k1 * A31 + &k2 * A32) * h));
    let k4 = field.eval(&(y + (k1 * A41 + &k2 * A42 + &k3 * A43) * h));
    let k5 = field.eval(&(y + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
    let k6 = field.eval(&(y + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h));
    let y1 = y + (k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
    let k7 = field.eval(&y1);
    let e = (k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
    let n = y.len() as f64;
    let err = (e
        .iter()
        .zip(y.iter().zip(y1.iter()))
        .map(|(ei, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (ei / sc).powi(2)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let ydiff = &y1 - y;
    let bspl = k1 * h - &ydiff;
    let r4 = &ydiff - &k7 * h - &bspl;
    let r5 = (k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
    Step {
        rcont: [y.clone(), ydiff, bspl, r4, r5],
        y1,
        k7,
        err,
    }
}

fn dense(rc: &[V; 5], theta: f64) -> V {
    let t1 = 1.0 - theta;
    &rc[0] + (&rc[1] + (&rc[2] + (&rc[3] + &rc[4] * t1) * theta) * t1) * theta
}

fn initial_step(field: &dyn VectorField, y: &V, f0: &V, span: f64, rtol: f64, atol: f64) -> f64 {
    let sc = y.map(|v| atol + rtol * v.abs());
    let d0 = y.component_div(&sc).norm();
    let d1 = f0.component_div(&sc).norm();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.abs());
    let f1 = field.eval(&(y + f0 * h0));
    let d2 = (f1 - f0).component_div(&sc).norm() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.abs())
}

/// Integrate `x' = F(x)` over `t_span` with the Dormand-Prince 5(4) pair.
/// A zero-length span gives an empty record.
pub fn integrate(field: &dyn VectorField, x0: &V, t_span: (f64, f64), rtol: f64, atol: f64) -> Result<TrajectoryRecord> {
    integrate_with(
        field,
        x0,
        t_span,
        &IntegrateOptions {
            rtol,
            atol,
            ..Default::default()
        },
    )
}

pub fn integrate_with(field: &dyn VectorField, x0: &V, t_span: (f64, f64), opts: &IntegrateOptions) -> Result<TrajectoryRecord> {
    if x0.len() != field.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, field has dimension {}",
            x0.len(),
            field.dim()
        )));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::PreconditionViolated("rtol and atol must be positive".into()));
    }
    let (t0, t1) = t_span;
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        states: Vec::new(),
        event_log: Vec::new(),
        escaped: false,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if t1 == t0 {
        return Ok(rec);
    }
    if t1 < t0 {
        return Err(Error::PreconditionViolated("t_span must be increasing".into()));
    }
    rec.times.push(t0);
    rec.states.push(x0.clone());

    let mut t = t0;
    let mut y = x0.clone();
    let mut k1 = field.eval(&y);
    let mut h = initial_step(field, &y, &k1, t1 - t0, opts.rtol, opts.atol);
    let mut next_out = opts.output_step.map(|dt| (t0 + dt, dt));
    // A start on the section is not a crossing.
    let mut g_prev = opts.section.as_ref().map(|s| {
        let g = s.value(&y);
        if g.abs() <= 1e-12 * (1.0 + y.norm()) {
            0.0
        } else {
            g
        }
    });

    while t < t1 {
        if rec.accepted_steps + rec.rejected_steps >= opts.max_steps {
            return Err(Error::StepSizeUnderflow {
                t,
                state: y.iter().copied().collect(),
            });
        }
        if t + h > t1 {
            h = t1 - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow {
                t,
                state: y.iter().copied().collect(),
            });
        }
        let step = dp_step(field, &y, &k1, h, opts.rtol, opts.atol);
        if !step.err.is_finite() || !step.y1.iter().all(|v| v.is_finite()) {
            rec.rejected_steps += 1;
            h *= 0.2;
            continue;
        }
        if step.err > 1.0 {
            rec.rejected_steps += 1;
            h *= (0.9 * step.err.powf(-0.2)).max(0.2);
            continue;
        }
        rec.accepted_steps += 1;
        let t_new = t + h;

        let mut stop_at: Option<f64> = None;
        if let (Some(sec), Some(gp)) = (&opts.section, g_prev) {
            let g_new = sec.value(&step.y1);
            if gp * sec.direction < 0.0 && g_new * sec.direction >= 0.0 {
                let (tc, yc) = refine_crossing(field, sec, &y, &k1, t, h, &step.rcont, gp, g_new);
                rec.event_log.push(SectionCrossing {
                    time: tc,
                    state: yc,
                    direction: sec.direction,
                });
                if opts.stop_after_crossings.is_some_and(|n| rec.event_log.len() >= n) {
                    stop_at = Some(tc);
                }
            }
            g_prev = Some(g_new);
        }

        match &mut next_out {
            Some((tout, dt)) => {
                let end = stop_at.unwrap_or(t_new);
                while *tout <= end + 1e-12 * dt.abs() {
                    let theta = ((*tout - t) / h).clamp(0.0, 1.0);
                    rec.times.push(*tout);
                    rec.states.push(dense(&step.rcont, theta));
                    *tout = t0 + (rec.times.len() as f64) * *dt;
                }
            }
            None => {
                if stop_at.is_none() {
                    rec.times.push(t_new);
                    rec.states.push(step.y1.clone());
                }
            }
        }

        if let Some(tc) = stop_at {
            let last = rec.event_log.last().expect("just pushed").state.clone();
            if opts.output_step.is_none() {
                rec.times.push(tc);
                rec.states.push(last);
            }
            return Ok(rec);
        }

        t = t_new;
        y = step.y1;
        k1 = step.k7;

        if let Some((center, radius)) = &opts.escape {
            if (&y - center).norm() > *radius {
                rec.escaped = true;
                if opts.output_step.is_some() && rec.times.last() != Some(&t) {
                    rec.times.push(t);
                    rec.states.push(y.clone());
                }
                return Ok(rec);
            }
        }
        let fac = if step.err == 0.0 { 5.0 } else { (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    Ok(rec)
}

/// Locate the crossing inside an accepted step: dense output gives the
/// starting guess, then the root of `g(step(t, tau))` is polished by
/// re-stepping from the start of the step.
#[allow(clippy::too_many_arguments)]
fn refine_crossing(
    field: &dyn VectorField,
    sec: &PoincareSection,
    y: &V,
    k1: &V,
    t: f64,
    h: f64,
    rcont: &[V; 5],
    g0: f64,
    g1: f64,
) -> (f64, V) {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let (mut glo, mut ghi) = (g0, g1);
    for _ in 0..60 {
        let mid = lo - glo * (hi - lo) / (ghi - glo);
        let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
        let gm = sec.value(&dense(rcont, mid));
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
        if (hi - lo) < 1e-13 || gm.abs() < 1e-15 {
            break;
        }
    }
    let restep = |theta: f64| -> V {
        if theta <= 0.0 {
            return y.clone();
        }
        dp_step(field, y, k1, theta * h, 1.0, 1.0).y1
    };
    let mut a = 0.0;
    let mut b = 1.0;
    let mut ga = g0;
    let mut gb = g1;
    let guess = 0.5 * (lo + hi);
    let mut best = (a, ga);
    for it in 0..40 {
        let mut m = if it == 0 { guess } else { a - ga * (b - a) / (gb - ga) };
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let gm = sec.value(&restep(m));
        if gm.abs() < best.1.abs() {
            best = (m, gm);
        }
        if gm.abs() <= 1e-15 * (1.0 + sec.anchor.norm()) || (b - a) < 1e-15 {
            break;
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
            gb *= 0.5;
        } else {
            b = m;
            gb = gm;
            ga *= 0.5;
        }
    }
    if gb.abs() < best.1.abs() {
        best = (b, gb);
    }
    (t + best.0 * h, restep(best.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitClass {
    SpiralIn,
    SpiralOut,
    NearPeriodic,
    Undetermined,
}

/// Relative change of the distance envelope per oscillation below which an
/// orbit counts as periodic.
pub const PERIODIC_DRIFT: f64 = 0.01;

/// Classify by the trend of the distance to `equilibrium`, sampled once per
/// oscillation: at section crossings when at least three were logged,
/// otherwise as the maximum between successive upward zero crossings of the
/// most active coordinate.
pub fn classify_orbit(traj: &TrajectoryRecord, equilibrium: &V) -> OrbitClass {
    let dist = |x: &V| (x - equilibrium).norm();
    let envelope: Vec<f64> = if traj.event_log.len() >= 3 {
        traj.event_log.iter().map(|c| dist(&c.state)).collect()
    } else {
        window_maxima(traj, equilibrium)
    };
    if envelope.len() < 3 {
        return if traj.escaped { OrbitClass::SpiralOut } else { OrbitClass::Undetermined };
    }
    let drifts: Vec<f64> = envelope.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let mut sorted = drifts.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if traj.escaped {
        return OrbitClass::SpiralOut;
    }
    if median.abs() < PERIODIC_DRIFT {
        return OrbitClass::NearPeriodic;
    }
    let agree = drifts.iter().filter(|d| d.signum() == median.signum()).count();
    if (agree as f64) < 0.8 * drifts.len() as f64 {
        return OrbitClass::Undetermined;
    }
    if median < 0.0 {
        OrbitClass::SpiralIn
    } else {
        OrbitClass::SpiralOut
    }
}

fn window_maxima(traj: &TrajectoryRecord, eq: &V) -> Vec<f64> {
    if traj.states.len() < 3 {
        return Vec::new();
    }
    let n = eq.len();
    let count = traj.states.len() as f64;
    let coord = (0..n)
        .max_by(|&a, &b| {
            let var = |c: usize| {
                let mean = traj.states.iter().map(|x| x[c]).sum::<f64>() / count;
                traj.states.iter().map(|x| (x[c] - mean).powi(2)).sum::<f64>()
            };
            var(a).total_cmp(&var(b))
        })
        .expect("nonempty state");
    let sig: Vec<f64> = traj.states.iter().map(|x| x[coord] - eq[coord]).collect();
    let ups: Vec<usize> = (1..sig.len()).filter(|&i| sig[i - 1] < 0.0 && sig[i] >= 0.0).collect();
    ups.windows(2)
        .map(|w| traj.states[w[0]..w[1]].iter().map(|x| (x - eq).norm()).fold(0.0, f64::max))
        .collect()
}

/// CSV with columns `t, x1..xn, event`; section crossings are extra rows
/// marked `section+` or `section-`, merged in time order.
pub fn write_trajectory_csv<W: Write>(traj: &TrajectoryRecord, mut out: W) -> std::io::Result<()> {
    let n = traj.states.first().map_or(0, |x| x.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("event".into());
    writeln!(out, "{}", header.join(","))?;
    let row = |out: &mut W, t: f64, x: &V, tag: &str| -> std::io::Result<()> {
        let mut cells = vec![format!("{t:.12e}")];
        cells.extend(x.iter().map(|v| format!("{v:.12e}")));
        cells.push(tag.to_string());
        writeln!(out, "{}", cells.join(","))
    };
    let mut ev = traj.event_log.iter().peekable();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        while let Some(c) = ev.next_if(|c| c.time <= *t) {
            row(&mut out, c.time, &c.state, if c.direction > 0.0 { "section+" } else { "section-" })?;
        }
        row(&mut out, *t, x, "")?;
    }
    for c in ev {
        row(&mut out, c.time, &c.state, if c.direction > 0.0 { "section+" } else { "section-" })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;

    fn oscillator(damping: f64) -> impl VectorField {
        FnField::new(2, move |x: &V| V::from_vec(vec![x[1], -x[0] - damping * x[1]]))
    }

    #[test]
    fn harmonic_energy_is_conserved() {
        let f = oscillator(0.0);
        let rec = integrate(&f, &V::from_vec(vec![1.0, 0.0]), (0.0, 100.0), 1e-9, 1e-12).unwrap();
        let e = rec.states.iter().map(|x| (x[0] * x[0] + x[1] * x[1] - 1.0).abs()).fold(0.0, f64::max);
        assert!(e < 1e-6, "energy drift {e}");
        assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dense_output_is_accurate() {
        let f = oscillator(0.0);
        let opts = IntegrateOptions {
            output_step: Some(0.1),
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let rec = integrate_with(&f, &V::from_vec(vec![1.0, 0.0]), (0.0, 10.0), &opts).unwrap();
        assert_eq!(rec.times.len(), 101);
        for (t, x) in rec.times.iter().zip(&rec.states) {
            assert!((x[0] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_span_is_empty() {
        let rec = integrate(&oscillator(0.0), &V::from_vec(vec![1.0, 0.0]), (3.0, 3.0), 1e-8, 1e-10).unwrap();
        assert!(rec.times.is_empty());
    }

    #[test]
    fn section_crossings_are_periodic() {
        let f = oscillator(0.0);
        let sec = PoincareSection::new(V::from_vec(vec![0.0, 1.0]), V::zeros(2), 1.0).unwrap();
        let opts = IntegrateOptions {
            section: Some(sec),
            rtol: 1e-10,
            atol: 1e-12,
            ..Default::default()
        };
        let rec = integrate_with(&f, &V::from_vec(vec![1.0, 0.0]), (0.0, 20.0), &opts).unwrap();
        // x' = y, y' = -x: y increases through zero at x = -1, t = pi + 2 pi k.
        assert_eq!(rec.event_log.len(), 3);
        for (k, c) in rec.event_log.iter().enumerate() {
            let t = std::f64::consts::PI * (2 * k + 1) as f64;
            assert!((c.time - t).abs() < 1e-7, "{} vs {t}", c.time);
            assert!(c.state[1].abs() < 1e-12, "{}", c.state[1]);
        }
    }

    #[test]
    fn damped_oscillator_spirals_in() {
        let f = oscillator(0.1);
        let rec = integrate(&f, &V::from_vec(vec![1.0, 0.0]), (0.0, 100.0), 1e-8, 1e-10).unwrap();
        assert_eq!(classify_orbit(&rec, &V::zeros(2)), OrbitClass::SpiralIn);
        let rec = integrate(&oscillator(0.0), &V::from_vec(vec![1.0, 0.0]), (0.0, 100.0), 1e-8, 1e-10).unwrap();
        assert_eq!(classify_orbit(&rec, &V::zeros(2)), OrbitClass::NearPeriodic);
    }

    #[test]
    fn csv_marks_crossings() {
        let f = oscillator(0.0);
        let sec = PoincareSection::new(V::from_vec(vec![0.0, 1.0]), V::zeros(2), 1.0).unwrap();
        let opts = IntegrateOptions {
            section: Some(sec),
            output_step: Some(0.5),
            ..Default::default()
        };
        let rec = integrate_with(&f, &V::from_vec(vec![1.0, 0.0]), (0.0, 7.0), &opts).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,x2,event\n"));
        assert_eq!(text.matches("section+").count(), 1);
        assert_eq!(text.lines().count(), 1 + 15 + 1);
    }
}
