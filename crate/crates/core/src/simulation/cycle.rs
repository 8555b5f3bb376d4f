use nalgebra::DVector;
use serde::Serialize;

use super::{integrate, integrate_with, IntegrateOptions, PoincareSection};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::RMatrix;

pub const TOL_CYCLE: f64 = 1e-8;

type V = DVector<f64>;

/// Section through `x0` normal to the imaginary part of the eigenvector of
/// the complex eigenvalue of `DF(x0)` closest to the imaginary axis.
pub fn hopf_section(field: &dyn VectorField, x0: &V) -> Result<PoincareSection> {
    let j = field.jacobian(x0);
    let lambda = crate::linalg::eigenvalues(&j)
        .into_iter()
        .filter(|z| z.im > 1e-9 * (1.0 + z.norm()))
        .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
        .ok_or_else(|| Error::PreconditionViolated("Jacobian has no complex eigenvalue".into()))?;
    let (r, _) = crate::bifurcation::eigenvector_pair(&j, lambda);
    let k = (0..r.len()).max_by(|&a, &b| r[a].norm().total_cmp(&r[b].norm())).unwrap_or(0);
    let r = &r * (r[k].conj() / r[k].norm());
    let normal = r.map(|z| z.im);
    PoincareSection::new(normal, x0.clone(), 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilityHint {
    ContractingSection,
    ExpandingSection,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCycleEstimate {
    pub period: f64,
    pub anchor_state: V,
    pub return_error: f64,
    pub stability_hint: StabilityHint,
    /// `|P(x + e) - P(x)| / |e|` for a small radial `e` on the section.
    pub radial_multiplier: f64,
    /// Largest distance from the section anchor over one period.
    pub amplitude: f64,
    pub returns: usize,
}

#[derive(Debug, Clone)]
pub struct CycleSearchOptions {
    pub max_returns: usize,
    /// Longest time allowed for a single return.
    pub max_return_time: f64,
    /// Orbits farther than this from the anchor count as escaping.
    pub escape_radius: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for CycleSearchOptions {
    fn default() -> Self {
        Self {
            max_returns: 400,
            max_return_time: 100.0,
            escape_radius: 10.0,
            rtol: 1e-11,
            atol: 1e-13,
        }
    }
}

struct ReturnMap<'a> {
    field: &'a dyn VectorField,
    section: &'a PoincareSection,
    basis: RMatrix,
    opts: &'a CycleSearchOptions,
    calls: usize,
}

impl ReturnMap<'_> {
    fn to_state(&self, u: &V) -> V {
        &self.section.anchor + &self.basis * u
    }

    fn to_coords(&self, x: &V) -> V {
        self.basis.transpose() * (x - &self.section.anchor)
    }

    /// `(P(u), return time)`, or `None` when the orbit escapes or never returns.
    fn apply(&mut self, u: &V) -> Result<Option<(V, f64)>> {
        if self.calls >= self.opts.max_returns {
            return Err(Error::CycleNotFound { returns: self.calls });
        }
        self.calls += 1;
        let x = self.to_state(u);
        let rec = integrate_with(
            self.field,
            &x,
            (0.0, self.opts.max_return_time),
            &IntegrateOptions {
                rtol: self.opts.rtol,
                atol: self.opts.atol,
                section: Some(self.section.clone()),
                stop_after_crossings: Some(1),
                escape: Some((self.section.anchor.clone(), self.opts.escape_radius)),
                ..Default::default()
            },
        );
        let rec = match rec {
            Ok(r) => r,
            Err(Error::StepSizeUnderflow { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(rec.event_log.first().map(|c| (self.to_coords(&c.state), c.time)))
    }
}

/// Orthonormal basis of the hyperplane orthogonal to `normal` (columns).
fn hyperplane_basis(normal: &V) -> RMatrix {
    let n = normal.len();
    let mut m = RMatrix::zeros(n, n);
    m.set_column(0, normal);
    for k in 1..n {
        let mut e = V::zeros(n);
        e[(normal.iamax() + k) % n] = 1.0;
        m.set_column(k, &e);
    }
    let q = m.qr().q();
    q.columns(1, n - 1).into_owned()
}

/// Find a periodic orbit through the section by its return map. The seed is
/// projected onto the section; the search tries Newton from the seed, then
/// brackets a fixed point along the ray from the anchor through the seed.
pub fn poincare_cycle_search(
    field: &dyn VectorField,
    section: &PoincareSection,
    seed: &V,
    opts: &CycleSearchOptions,
) -> Result<LimitCycleEstimate> {
    let n = field.dim();
    if section.normal.len() != n || seed.len() != n {
        return Err(Error::DimensionMismatch("section and seed must match the field dimension".into()));
    }
    let seed = section.project(seed);
    let f = field.eval(&seed);
    let fscale = f.norm();
    if fscale <= 1e-12 * (1.0 + seed.norm()) {
        return Err(Error::CycleNotFound { returns: 0 });
    }
    let flux = section.normal.dot(&f);
    if flux.abs() <= 1e-9 * fscale {
        return Err(Error::NonTransversal);
    }
    let section = PoincareSection {
        direction: flux.signum(),
        ..section.clone()
    };
    let mut map = ReturnMap {
        field,
        basis: hyperplane_basis(&section.normal),
        section: &section,
        opts,
        calls: 0,
    };
    let u0 = map.to_coords(&seed);
    if u0.norm() == 0.0 {
        return Err(Error::CycleNotFound { returns: 0 });
    }
    // Fast transverse directions die out within one return, so the ray
    // through the first return point follows the slow oscillation.
    let (u0, dir) = match map.apply(&u0)? {
        Some((p, _)) if p.norm() > 0.0 => (p.clone(), p.normalize()),
        _ => (u0.clone(), u0.normalize()),
    };
    let s0 = u0.norm();

    // A fixed point at the anchor is the equilibrium itself, not a cycle.
    let collapsed = |u: &V| u.norm() < 1e-3 * s0;
    let fixed = match newton(&mut map, &u0)?.filter(|u| !collapsed(u)) {
        Some(u) => u,
        None => {
            let (a, b) = bracket(&mut map, &dir, s0)?;
            let s = bisect_radial(&mut map, &dir, a, b)?;
            log::debug!("radial bracket [{a:.6e}, {b:.6e}] narrowed to {s:.6e}");
            // One return puts the guess back on the slow curve.
            let guess = match map.apply(&(&dir * s))? {
                Some((p, _)) => p,
                None => &dir * s,
            };
            match newton(&mut map, &guess)?.filter(|u| !collapsed(u)) {
                Some(u) => u,
                None => {
                    // Strongly expanding orbits defeat single shooting.
                    let (_, t) = map.apply(&guess)?.ok_or(Error::CycleNotFound { returns: map.calls })?;
                    let segments = ((t / 0.5).ceil() as usize).max(8);
                    let x = map.to_state(&guess);
                    return refine_cycle_shooting(field, &section, &x, t, segments, opts).map(|mut c| {
                        c.returns += map.calls;
                        c
                    });
                }
            }
        }
    };
    finish(&mut map, &fixed)
}

/// Radial displacement along the slow curve: with `c = P(s dir)`, the value
/// `|P(c)| - |c|`, or `+inf` when either orbit escapes.
fn radial(map: &mut ReturnMap, dir: &V, s: f64) -> Result<f64> {
    let Some((c, _)) = map.apply(&(dir * s))? else { return Ok(f64::INFINITY) };
    Ok(match map.apply(&c)? {
        Some((p, _)) => p.norm() - c.norm(),
        None => f64::INFINITY,
    })
}

fn bracket(map: &mut ReturnMap, dir: &V, s0: f64) -> Result<(f64, f64)> {
    // Which side holds the cycle depends on the stability of the
    // equilibrium, so walk outward and inward alternately.
    let r0 = radial(map, dir, s0)?;
    let mut out = (s0, r0);
    let mut inn = (s0, r0);
    let (mut out_done, mut in_done) = (false, false);
    while !(out_done && in_done) {
        if !out_done {
            let s = out.0 * 1.3;
            if s > map.opts.escape_radius {
                out_done = true;
            } else {
                let r = radial(map, dir, s)?;
                if r.signum() != out.1.signum() {
                    return Ok((out.0, s));
                }
                if r.is_infinite() {
                    out_done = true;
                }
                out = (s, r);
            }
        }
        if !in_done {
            let s = inn.0 / 1.3;
            if s < 1e-6 * s0.max(1e-300) {
                in_done = true;
            } else {
                let r = radial(map, dir, s)?;
                if r.signum() != inn.1.signum() {
                    return Ok((s, inn.0));
                }
                inn = (s, r);
            }
        }
    }
    Err(Error::CycleNotFound { returns: map.calls })
}

fn bisect_radial(map: &mut ReturnMap, dir: &V, mut a: f64, mut b: f64) -> Result<f64> {
    let ra = radial(map, dir, a)?;
    for _ in 0..30 {
        let m = 0.5 * (a + b);
        let rm = radial(map, dir, m)?;
        log::trace!("radial({m:.6e}) = {rm:.3e}");
        if rm.signum() == ra.signum() {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-6 * b {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

fn newton(map: &mut ReturnMap, u0: &V) -> Result<Option<V>> {
    let m = u0.len();
    let mut u = u0.clone();
    let Some((mut p, _)) = map.apply(&u)? else { return Ok(None) };
    let tol = |u: &V, map: &ReturnMap| TOL_CYCLE * map.to_state(u).norm().max(1.0);
    for _ in 0..25 {
        let g = &p - &u;
        log::trace!("newton |u| = {:.8e}, residual {:.3e}", u.norm(), g.norm());
        if g.norm() <= tol(&u, map) {
            return Ok(Some(u));
        }
        let mut jac = RMatrix::zeros(m, m);
        let h = 1e-6 * (1.0 + u.norm());
        for k in 0..m {
            let mut e = V::zeros(m);
            e[k] = h;
            let Some((pk, _)) = map.apply(&(&u + &e))? else { return Ok(None) };
            jac.set_column(k, &((pk - &p) / h - e / h));
        }
        let Some(mut delta) = jac.lu().solve(&(-&g)) else { return Ok(None) };
        // The equilibrium is a fixed point too; keep steps from jumping onto it.
        let cap = 0.5 * u.norm();
        if delta.norm() > cap {
            delta *= cap / delta.norm();
        }
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let trial = &u + &delta * t;
            if let Some((pt, _)) = map.apply(&trial)? {
                if (&pt - &trial).norm() < g.norm() {
                    u = trial;
                    p = pt;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            log::debug!("newton stalled at |u| = {:.6e}, residual {:.3e}", u.norm(), g.norm());
            return Ok(None);
        }
    }
    Ok(((&p - &u).norm() <= tol(&u, map)).then_some(u))
}

fn finish(map: &mut ReturnMap, u: &V) -> Result<LimitCycleEstimate> {
    let (_, period) = map.apply(u)?.ok_or(Error::CycleNotFound { returns: map.calls })?;
    let x0 = map.to_state(u);
    cycle_estimate(map.field, map.section, &x0, period, map.calls, map.opts)
}

fn flow(field: &dyn VectorField, x: &V, t: f64, opts: &CycleSearchOptions) -> Result<V> {
    let rec = integrate(field, x, (0.0, t), opts.rtol, opts.atol)?;
    Ok(rec.states.last().cloned().unwrap_or_else(|| x.clone()))
}

/// Jacobian of the time-`t` flow map by central differences.
fn flow_jacobian(field: &dyn VectorField, x: &V, t: f64, opts: &CycleSearchOptions) -> Result<RMatrix> {
    let n = x.len();
    let mut phi = RMatrix::zeros(n, n);
    for k in 0..n {
        let h = 1e-6 * (1.0 + x[k].abs());
        let mut e = V::zeros(n);
        e[k] = h;
        let col = (flow(field, &(x + &e), t, opts)? - flow(field, &(x - &e), t, opts)?) / (2.0 * h);
        phi.set_column(k, &col);
    }
    Ok(phi)
}

/// Evaluate a converged orbit: return error and radial slope of the return
/// map at `x0`, and amplitude about the section anchor.
fn cycle_estimate(
    field: &dyn VectorField,
    section: &PoincareSection,
    x0: &V,
    period: f64,
    returns: usize,
    opts: &CycleSearchOptions,
) -> Result<LimitCycleEstimate> {
    let section = PoincareSection {
        direction: section.normal.dot(&field.eval(x0)).signum(),
        ..section.clone()
    };
    let mut map = ReturnMap {
        field,
        basis: hyperplane_basis(&section.normal),
        section: &section,
        opts,
        calls: 0,
    };
    let u = map.to_coords(x0);
    let return_error = match map.apply(&u)? {
        Some((p, _)) => (p - &u).norm(),
        None => f64::INFINITY,
    };
    let p_time = flow(field, x0, period, opts)?;
    let s = u.norm().max(1e-12);
    let eps = 1e-4 * s;
    let perturbed = map.to_state(&(&u * (1.0 + eps / s)));
    let radial_multiplier = match integrate_with(
        field,
        &perturbed,
        (0.0, 2.0 * period),
        &IntegrateOptions {
            rtol: opts.rtol,
            atol: opts.atol,
            section: Some(section.clone()),
            stop_after_crossings: Some(1),
            escape: Some((section.anchor.clone(), opts.escape_radius)),
            ..Default::default()
        },
    ) {
        Ok(rec) => rec
            .event_log
            .first()
            .map_or(f64::INFINITY, |c| (&c.state - map.section.project(&p_time)).norm() / eps),
        Err(Error::StepSizeUnderflow { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let rec = integrate_with(
        field,
        x0,
        (0.0, period),
        &IntegrateOptions {
            rtol: opts.rtol,
            atol: opts.atol,
            output_step: Some(period / 2000.0),
            ..Default::default()
        },
    )?;
    let amplitude = rec.states.iter().map(|y| (y - &section.anchor).norm()).fold(0.0, f64::max);
    Ok(LimitCycleEstimate {
        period,
        anchor_state: x0.clone(),
        return_error,
        stability_hint: if radial_multiplier > 1.0 {
            StabilityHint::ExpandingSection
        } else {
            StabilityHint::ContractingSection
        },
        radial_multiplier,
        amplitude,
        returns: returns + map.calls,
    })
}

/// Refine a periodic orbit by multiple shooting from `guess`, a state near
/// the orbit, and a period estimate. The orbit is split into `segments`
/// pieces; the phase is fixed by requiring the first node on the section.
/// Suited to strongly unstable orbits where the return map is badly
/// conditioned.
pub fn refine_cycle_shooting(
    field: &dyn VectorField,
    section: &PoincareSection,
    guess: &V,
    period: f64,
    segments: usize,
    opts: &CycleSearchOptions,
) -> Result<LimitCycleEstimate> {
    let n = field.dim();
    if guess.len() != n || section.normal.len() != n {
        return Err(Error::DimensionMismatch("guess and section must match the field dimension".into()));
    }
    if period.is_nan() || period <= 0.0 || segments < 2 {
        return Err(Error::PreconditionViolated("need a positive period and at least two segments".into()));
    }
    let nseg = segments;
    let dim = n * nseg + 1;
    let mut nodes: Vec<V> = Vec::with_capacity(nseg);
    let mut x = section.project(guess);
    for _ in 0..nseg {
        nodes.push(x.clone());
        x = flow(field, &x, period / nseg as f64, opts)?;
    }
    let mut t = period;
    let residual = |nodes: &[V], t: f64| -> Result<(V, Vec<V>)> {
        let mut r = V::zeros(dim);
        let mut ends = Vec::with_capacity(nseg);
        for i in 0..nseg {
            let end = flow(field, &nodes[i], t / nseg as f64, opts)?;
            r.rows_mut(i * n, n).copy_from(&(&end - &nodes[(i + 1) % nseg]));
            ends.push(end);
        }
        r[dim - 1] = section.value(&nodes[0]);
        Ok((r, ends))
    };
    let (mut r, mut ends) = residual(&nodes, t)?;
    let mut calls = nseg;
    for _ in 0..30 {
        let scale = nodes[0].norm().max(1.0);
        if r.norm() <= 0.1 * TOL_CYCLE * scale {
            break;
        }
        let mut jac = RMatrix::zeros(dim, dim);
        for i in 0..nseg {
            let phi = flow_jacobian(field, &nodes[i], t / nseg as f64, opts)?;
            calls += 2 * n;
            jac.view_mut((i * n, i * n), (n, n)).copy_from(&phi);
            let next = (i + 1) % nseg;
            for k in 0..n {
                jac[(i * n + k, next * n + k)] -= 1.0;
            }
            let fe = field.eval(&ends[i]) / nseg as f64;
            jac.view_mut((i * n, dim - 1), (n, 1)).copy_from(&fe);
        }
        for k in 0..n {
            jac[(dim - 1, k)] = section.normal[k];
        }
        let delta = jac.lu().solve(&(-&r)).ok_or(Error::CycleNotFound { returns: calls })?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let trial: Vec<V> = (0..nseg).map(|i| &nodes[i] + delta.rows(i * n, n) * step).collect();
            let tt = t + delta[dim - 1] * step;
            if tt > 0.0 {
                if let Ok((rt, et)) = residual(&trial, tt) {
                    calls += nseg;
                    if rt.norm() < r.norm() {
                        nodes = trial;
                        t = tt;
                        r = rt;
                        ends = et;
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        log::trace!("shooting residual {:.3e}, period {t:.6}", r.norm());
        if !accepted {
            return Err(Error::CycleNotFound { returns: calls });
        }
    }
    if r.norm() > TOL_CYCLE * nodes[0].norm().max(1.0) {
        return Err(Error::CycleNotFound { returns: calls });
    }
    if (&nodes[0] - &section.anchor).norm() < 1e-6 * (1.0 + section.anchor.norm()) {
        return Err(Error::CycleNotFound { returns: calls });
    }
    cycle_estimate(field, section, &nodes[0], t, calls, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;

    fn oscillator(damping: f64) -> impl VectorField {
        FnField::new(2, move |x: &V| V::from_vec(vec![x[1], -x[0] - damping * x[1]]))
    }

    #[test]
    fn normal_form_cycle() {
        // r' = r (mu - r^2) has a stable cycle at r = sqrt(mu).
        let mu = 0.25;
        let f = FnField::new(2, move |x: &V| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            V::from_vec(vec![mu * x[0] - 2.0 * x[1] - x[0] * r2, 2.0 * x[0] + mu * x[1] - x[1] * r2])
        });
        let sec = PoincareSection::new(V::from_vec(vec![0.0, 1.0]), V::zeros(2), 1.0).unwrap();
        let c = poincare_cycle_search(&f, &sec, &V::from_vec(vec![0.2, 0.0]), &CycleSearchOptions::default()).unwrap();
        assert!((c.period - std::f64::consts::PI).abs() < 1e-6, "{c:?}");
        assert!((c.amplitude - 0.5).abs() < 1e-6);
        assert_eq!(c.stability_hint, StabilityHint::ContractingSection);
        assert!(c.return_error <= TOL_CYCLE * c.anchor_state.norm().max(1.0));
    }

    #[test]
    fn equilibrium_seed_is_rejected() {
        let f = oscillator(0.1);
        let sec = PoincareSection::new(V::from_vec(vec![0.0, 1.0]), V::zeros(2), 1.0).unwrap();
        assert!(matches!(
            poincare_cycle_search(&f, &sec, &V::zeros(2), &CycleSearchOptions::default()),
            Err(Error::CycleNotFound { .. })
        ));
    }
}
