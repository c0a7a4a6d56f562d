//! Adaptive Dormand–Prince 5(4) integration of characteristic flows.
//!
//! After every accepted step the state is projected back onto the model's
//! constraint set and reduced into its fundamental region. Scalar
//! quantities (observable integrals, action, elapsed Hamiltonian time) ride
//! along as extra components of the state.

use std::io::Write;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::field::{characteristic_field, speed_factor, Parametrization};
use crate::error::{CharflowError, Result};
use crate::models::Model;
use crate::{Point, Vector};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Local error tolerance per unit step (absolute on chart coordinates).
    pub tol: f64,
    pub max_steps: usize,
    pub h_max: f64,
    /// Keep every accepted step in the returned trajectory.
    pub record: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 50_000_000,
            h_max: 1.0,
            record: true,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: [f64; 4],
    pub drift: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub reductions: usize,
    pub max_drift: f64,
}

/// An integrated characteristic curve.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub model: String,
    pub coord_dim: usize,
    pub parametrization: Parametrization,
    pub samples: Vec<TrajectorySample>,
    pub stats: IntegratorStats,
    /// Accumulated deck transformation for quotient models.
    pub deck: Option<Matrix2<f64>>,
    /// Sum of per-step chart displacements (unwrapped motion).
    pub winding: Vector,
    pub end: Point,
    pub t_end: f64,
}

impl Trajectory {
    pub fn end_point(&self) -> Point {
        self.end
    }

    /// CSV with columns `t, x0.., drift`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let names: Vec<String> = (0..self.coord_dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,{},drift", names.join(","))?;
        for s in &self.samples {
            let coords: Vec<String> = s.point[..self.coord_dim].iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{:.17e},{},{:.6e}", s.t, coords.join(","), s.drift)?;
        }
        Ok(())
    }
}

pub(crate) type AuxFn<'a> = dyn Fn(&Point, &Vector, &mut [f64]) -> Result<()> + Sync + 'a;

/// Zero-crossing detector evaluated on continuous (unreduced) steps.
pub(crate) struct EventSpec<'a> {
    pub func: &'a (dyn Fn(&Point) -> f64 + Sync),
    /// `+1` for increasing crossings, `−1` decreasing, `0` both.
    pub direction: i8,
    pub t_min: f64,
    pub max_events: usize,
    /// Sign changes larger than this are chart cuts, not crossings.
    pub max_jump: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Event {
    pub t: f64,
    pub point: Point,
    pub aux: Vec<f64>,
    pub deck: Option<Matrix2<f64>>,
    pub winding: Vector,
}

pub(crate) struct RunOutput {
    pub trajectory: Trajectory,
    pub aux_at_stops: Vec<Vec<f64>>,
    pub points_at_stops: Vec<Point>,
    pub events: Vec<Event>,
    pub final_aux: Vec<f64>,
}

pub(crate) struct Run<'a> {
    pub model: &'a Model,
    pub param: Parametrization,
    pub opts: &'a IntegratorOptions,
    pub aux_dim: usize,
    pub aux_fn: Option<&'a AuxFn<'a>>,
    /// Times (in integration direction) at which auxiliaries are recorded.
    pub stops: &'a [f64],
    pub event: Option<EventSpec<'a>>,
}

struct Deriv {
    v: Vector,
    aux: Vec<f64>,
}

impl<'a> Run<'a> {
    fn rhs(&self, p: &Point, evals: &mut usize) -> Result<Deriv> {
        *evals += 1;
        let x = characteristic_field(self.model, p)?;
        let v = x * speed_factor(self.model, p, self.param);
        let mut aux = vec![0.0; self.aux_dim];
        if let Some(f) = self.aux_fn {
            f(p, &v, &mut aux)?;
        }
        Ok(Deriv { v, aux })
    }

    /// One Dormand–Prince step; returns the 5th-order state, the error
    /// estimate and the scale-weighted error norm.
    fn step(&self, p: &Point, aux: &[f64], h: f64, k1: &Deriv, evals: &mut usize) -> Result<(Point, Vec<f64>, f64)> {
        let mut ks: Vec<Deriv> = Vec::with_capacity(7);
        ks.push(Deriv {
            v: k1.v,
            aux: k1.aux.clone(),
        });
        for s in 1..7 {
            let mut q = *p;
            for (j, k) in ks.iter().enumerate() {
                if A[s][j] != 0.0 {
                    q += k.v * (h * A[s][j]);
                }
            }
            ks.push(self.rhs(&q, evals)?);
        }
        let mut p5 = *p;
        let mut err_p = Vector::zeros();
        for (j, k) in ks.iter().enumerate() {
            p5 += k.v * (h * B[j]);
            err_p += k.v * (h * (B[j] - B_LOW[j]));
        }
        let mut a5 = aux.to_vec();
        let mut err = 0.0f64;
        let tol = self.opts.tol;
        for i in 0..self.aux_dim {
            let mut e = 0.0;
            for (j, k) in ks.iter().enumerate() {
                a5[i] += h * B[j] * k.aux[i];
                e += h * (B[j] - B_LOW[j]) * k.aux[i];
            }
            err = err.max(e.abs() / (tol * (1.0 + a5[i].abs().max(aux[i].abs()))));
        }
        for i in 0..self.model.coord_dim() {
            err = err.max(err_p[i].abs() / tol);
        }
        Ok((p5, a5, err))
    }

    pub fn execute(&self, x0: &Point, t_end: f64) -> Result<RunOutput> {
        let model = self.model;
        let opts = self.opts;
        if !(opts.tol > 0.0) {
            return Err(CharflowError::InvalidArgument("tolerance must be positive".into()));
        }
        let dir = if t_end >= 0.0 { 1.0 } else { -1.0 };
        let (mut p, _) = model.reduce(&model.project(x0))?;
        let mut deck: Option<Matrix2<f64>> = None;
        let mut winding = Vector::zeros();
        let mut aux = vec![0.0; self.aux_dim];
        let mut t = 0.0;
        let mut stats = IntegratorStats::default();
        let mut samples = Vec::new();
        let drift0 = model.drift(&p);
        stats.max_drift = drift0;
        if opts.record {
            samples.push(TrajectorySample {
                t,
                point: p.into(),
                drift: drift0,
            });
        }
        let mut stops: Vec<f64> = self.stops.iter().copied().filter(|s| s * dir > 0.0).collect();
        stops.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
        let mut stop_idx = 0;
        let mut aux_at_stops = Vec::with_capacity(stops.len());
        // stops at t = 0 record the initial state
        let mut points_at_stops = Vec::with_capacity(stops.len());
        for _ in self.stops.iter().filter(|s| **s == 0.0) {
            aux_at_stops.push(aux.clone());
            points_at_stops.push(p);
        }
        let mut events = Vec::new();
        let mut k1 = self.rhs(&p, &mut stats.evaluations)?;
        let speed = k1.v.norm().max(1e-300);
        let mut h = (0.05 * opts.tol.powf(0.2) / speed).min(opts.h_max) * dir;
        if t_end == 0.0 {
            return Ok(self.finish(model, samples, stats, deck, winding, p, t, (aux_at_stops, points_at_stops), events, aux));
        }
        loop {
            let next_stop = stops.get(stop_idx).copied().unwrap_or(t_end);
            let target = if (next_stop - t_end) * dir < 0.0 { next_stop } else { t_end };
            let remaining = target - t;
            let mut hit_target = false;
            if (h - remaining) * dir >= 0.0 {
                h = remaining;
                hit_target = true;
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) && !hit_target {
                return Err(CharflowError::StepUnderflow(t));
            }
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(CharflowError::Internal(format!("step budget exhausted at t={t}")));
            }
            let (p_new, a_new, err) = self.step(&p, &aux, h, &k1, &mut stats.evaluations)?;
            if !(err <= 1.0) {
                stats.rejected += 1;
                let f = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.1) } else { 0.1 };
                h *= f;
                continue;
            }
            stats.accepted += 1;
            let t_new = if hit_target { target } else { t + h };
            let p_proj = model.project(&p_new);
            let step_disp = model.displacement(&p, &p_proj);
            if let Some(ev) = &self.event {
                if let Some(e) = self.detect(ev, &p, &aux, &k1, h, &p_proj, t, deck.as_ref(), &winding, &mut stats.evaluations)? {
                    events.push(e);
                    if events.len() >= ev.max_events {
                        let last = events.last().expect("just pushed").clone();
                        let (pf, g) = (last.point, last.deck);
                        let out_aux = last.aux.clone();
                        stats.max_drift = stats.max_drift.max(model.drift(&pf));
                        return Ok(self.finish(model, samples, stats, g, last.winding, pf, last.t, (aux_at_stops, points_at_stops), events, out_aux));
                    }
                }
            }
            winding += step_disp;
            let (p_red, gamma) = model.reduce(&p_proj)?;
            if let Some(g) = gamma {
                if (g - Matrix2::identity()).norm() > 0.0 {
                    stats.reductions += 1;
                    deck = Some(g * deck.unwrap_or_else(Matrix2::identity));
                }
            }
            p = p_red;
            aux = a_new;
            t = t_new;
            let drift = model.drift(&p);
            stats.max_drift = stats.max_drift.max(drift);
            if opts.record {
                samples.push(TrajectorySample {
                    t,
                    point: p.into(),
                    drift,
                });
            }
            k1 = self.rhs(&p, &mut stats.evaluations)?;
            if hit_target {
                while stop_idx < stops.len() && stops[stop_idx] == target {
                    aux_at_stops.push(aux.clone());
                    points_at_stops.push(p);
                    stop_idx += 1;
                }
                if target == t_end {
                    break;
                }
            }
            let f = if err > 0.0 { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
            h = (h * f).abs().min(opts.h_max) * dir;
        }
        Ok(self.finish(model, samples, stats, deck, winding, p, t, (aux_at_stops, points_at_stops), events, aux))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        model: &Model,
        samples: Vec<TrajectorySample>,
        stats: IntegratorStats,
        deck: Option<Matrix2<f64>>,
        winding: Vector,
        end: Point,
        t_end: f64,
        at_stops: (Vec<Vec<f64>>, Vec<Point>),
        events: Vec<Event>,
        final_aux: Vec<f64>,
    ) -> RunOutput {
        let (aux_at_stops, points_at_stops) = at_stops;
        RunOutput {
            trajectory: Trajectory {
                model: model.name.clone(),
                coord_dim: model.coord_dim(),
                parametrization: self.param,
                samples,
                stats,
                deck,
                winding,
                end,
                t_end,
            },
            aux_at_stops,
            points_at_stops,
            events,
            final_aux,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn detect(
        &self,
        ev: &EventSpec<'_>,
        p: &Point,
        aux: &[f64],
        k1: &Deriv,
        h: f64,
        p_new: &Point,
        t: f64,
        deck: Option<&Matrix2<f64>>,
        winding: &Vector,
        evals: &mut usize,
    ) -> Result<Option<Event>> {
        if let Some(e) = self.detect_in_chart(ev, p, aux, k1, h, p_new, t, deck, winding, evals)? {
            return Ok(Some(e));
        }
        // quotient charts: the crossing may happen in a neighbouring copy
        let imgs = self.model.deck_images(p);
        if imgs.is_empty() {
            return Ok(None);
        }
        let imgs_new = self.model.deck_images(p_new);
        for ((pk, g), (qk, _)) in imgs.iter().zip(imgs_new.iter()) {
            let s0 = (ev.func)(pk);
            let s1 = (ev.func)(qk);
            if !crossing_wanted(ev, s0, s1) {
                continue;
            }
            let k1k = self.rhs(pk, evals)?;
            let d = Some(g * deck.copied().unwrap_or_else(Matrix2::identity));
            if let Some(e) = self.detect_in_chart(ev, pk, aux, &k1k, h, qk, t, d.as_ref(), winding, evals)? {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }

    #[allow(clippy::too_many_arguments)]
    fn detect_in_chart(
        &self,
        ev: &EventSpec<'_>,
        p: &Point,
        aux: &[f64],
        k1: &Deriv,
        h: f64,
        p_new: &Point,
        t: f64,
        deck: Option<&Matrix2<f64>>,
        winding: &Vector,
        evals: &mut usize,
    ) -> Result<Option<Event>> {
        let s0 = (ev.func)(p);
        let s1 = (ev.func)(p_new);
        if !crossing_wanted(ev, s0, s1) {
            return Ok(None);
        }
        // Illinois iteration on the step length
        let (mut a, mut fa, mut b, mut fb) = (0.0, s0, h, s1);
        let mut side = 0;
        let mut best = (h, *p_new);
        for _ in 0..80 {
            let tau = (a * fb - b * fa) / (fb - fa);
            if !tau.is_finite() {
                break;
            }
            let (q, _, _) = self.step(p, aux, tau, k1, evals)?;
            let q = self.model.project(&q);
            let fq = (ev.func)(&q);
            best = (tau, q);
            if fq == 0.0 || (b - a).abs() < 1e-15 * h.abs() || fq.abs() < 1e-15 {
                break;
            }
            if (fq > 0.0) == (fb > 0.0) {
                b = tau;
                fb = fq;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = tau;
                fa = fq;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        let (tau, q) = best;
        if (t + tau) * h.signum() <= ev.t_min * h.signum() {
            return Ok(None);
        }
        let (_, a_tau, _) = self.step(p, aux, tau, k1, evals)?;
        let w = winding + self.model.displacement(p, &q);
        Ok(Some(Event {
            t: t + tau,
            point: q,
            aux: a_tau,
            deck: deck.copied(),
            winding: w,
        }))
    }
}

fn crossing_wanted(ev: &EventSpec<'_>, s0: f64, s1: f64) -> bool {
    let up = s0 < 0.0 && s1 >= 0.0;
    let down = s0 > 0.0 && s1 <= 0.0;
    let wanted = match ev.direction {
        1 => up,
        -1 => down,
        _ => up || down,
    };
    wanted && (s1 - s0).abs() <= ev.max_jump
}

/// Integrates the flow from `x0` for time `t_end` (negative for backward).
pub fn integrate_characteristic(
    model: &Model,
    x0: &Point,
    t_end: f64,
    tol: f64,
    param: Parametrization,
) -> Result<Trajectory> {
    integrate_with_options(model, x0, t_end, &IntegratorOptions::with_tol(tol), param)
}

pub fn integrate_with_options(
    model: &Model,
    x0: &Point,
    t_end: f64,
    opts: &IntegratorOptions,
    param: Parametrization,
) -> Result<Trajectory> {
    let run = Run {
        model,
        param,
        opts,
        aux_dim: 0,
        aux_fn: None,
        stops: &[],
        event: None,
    };
    Ok(run.execute(x0, t_end)?.trajectory)
}

/// End point of the time-`t` flow without recording samples.
pub fn flow_map(model: &Model, x0: &Point, t: f64, tol: f64, param: Parametrization) -> Result<Point> {
    let opts = IntegratorOptions {
        record: false,
        ..IntegratorOptions::with_tol(tol)
    };
    Ok(integrate_with_options(model, x0, t, &opts, param)?.end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_levelset, build_magnetic_torus, build_t3_contact, LevelSetSpec, MagneticSpec};
    use std::f64::consts::PI;

    #[test]
    fn torus_circle_closes() {
        let m = build_t3_contact().unwrap();
        let tr = integrate_characteristic(&m, &Point::zeros(), 2.0 * PI, 1e-10, Parametrization::CharacteristicField).unwrap();
        let d = m.displacement(&Point::zeros(), &tr.end);
        assert!(d.norm() < 1e-9);
        assert!((tr.winding[0] + 2.0 * PI).abs() < 1e-9);
        for w in tr.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn flat_magnetic_lines() {
        let eps = 0.3;
        let m = build_magnetic_torus(MagneticSpec::flat(eps)).unwrap();
        let th = 0.8;
        let x0 = Point::new(0.1, 0.2, th, 0.0);
        let t = 100.0;
        let tr = integrate_characteristic(&m, &x0, t, 1e-12, Parametrization::CharacteristicField).unwrap();
        let want = Point::new(0.1 - eps * t * th.cos(), 0.2 - eps * t * th.sin(), th, 0.0);
        assert!((tr.end - want).norm() < 1e-9, "{}", tr.end - want);
    }

    #[test]
    fn ellipsoid_plane_orbit_returns_at_capacity() {
        let a = 1.0;
        let m = build_levelset(LevelSetSpec::ellipsoid(a, crate::GOLDEN_RATIO)).unwrap();
        let r = (a / PI).sqrt();
        let x0 = Point::new(r, 0.0, 0.0, 0.0);
        let tr = integrate_characteristic(&m, &x0, a, 1e-12, Parametrization::HamiltonianField).unwrap();
        assert!((tr.end - x0).norm() < 1e-8, "{}", (tr.end - x0).norm());
        assert!(tr.stats.max_drift < 1e-12 * 2.0);
        // quarter period: ż = (2πi/a) z moves (r, 0) to (0, r)
        let q = integrate_characteristic(&m, &x0, a / 4.0, 1e-12, Parametrization::HamiltonianField).unwrap();
        assert!((q.end - Point::new(0.0, r, 0.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn reversibility() {
        let m = build_magnetic_torus(MagneticSpec::sin_x(0.05)).unwrap();
        let x0 = Point::new(0.3, 0.1, 1.0, 0.0);
        let tol = 1e-10;
        let fwd = integrate_characteristic(&m, &x0, 7.0, tol, Parametrization::CharacteristicField).unwrap();
        let back = integrate_characteristic(&m, &fwd.end, -7.0, tol, Parametrization::CharacteristicField).unwrap();
        assert!((back.end - x0).norm() < 10.0 * tol);
    }
}
