//! Closed characteristics: Poincaré sections, first-return maps refined by
//! damped Gauss–Newton, loop actions and deduplication.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{characteristic_field, speed_factor, Parametrization};
use super::integrator::{EventSpec, IntegratorOptions, Run};
use crate::error::{CharflowError, Result};
use crate::forms::halton;
use crate::models::{Model, ModelKind};
use crate::{Point, Vector};

/// A hyperplane section `{ n · (p − origin) = 0 }` in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub origin: [f64; 4],
    pub normal: [f64; 4],
    /// Crossings farther than this from the origin are ignored.
    #[serde(default)]
    pub radius: Option<f64>,
    /// `+1` increasing crossings, `−1` decreasing, `0` both.
    #[serde(default = "default_direction")]
    pub direction: i8,
    /// Chart axes held at the origin's value when seeding and refining.
    #[serde(default)]
    pub frozen_axes: Vec<usize>,
}

fn default_direction() -> i8 {
    1
}

impl SectionSpec {
    pub fn new(origin: Point, normal: Vector) -> Self {
        Self {
            origin: origin.into(),
            normal: normal.into(),
            radius: None,
            direction: 1,
            frozen_axes: Vec::new(),
        }
    }

    pub fn with_frozen(mut self, axes: &[usize]) -> Self {
        self.frozen_axes = axes.to_vec();
        self
    }

    fn origin(&self) -> Point {
        Point::from(self.origin)
    }

    fn normal(&self) -> Vector {
        Vector::from(self.normal)
    }

    /// Signed section coordinate of `p`.
    pub fn value(&self, model: &Model, p: &Point) -> f64 {
        self.normal().dot(&model.displacement(&self.origin(), p))
    }

    /// Onto the section and the constraint set (alternating projections),
    /// with frozen axes reset.
    fn project(&self, model: &Model, p: &Point) -> Point {
        let n = self.normal();
        let n2 = n.norm_squared();
        let mut q = *p;
        for _ in 0..20 {
            for &a in &self.frozen_axes {
                q[a] = self.origin[a];
            }
            q -= n * (self.value(model, &q) / n2);
            q = model.project(&q);
            if self.value(model, &q).abs() < 1e-14 && model.drift(&q) < 1e-14 {
                break;
            }
        }
        q
    }

    /// Orthonormal directions in the section plane, excluding frozen axes.
    fn tangent_basis(&self, dim: usize) -> Vec<Vector> {
        let mut constraints = vec![self.normal()];
        for &a in &self.frozen_axes {
            let mut e = Vector::zeros();
            e[a] = 1.0;
            constraints.push(e);
        }
        let mut basis: Vec<Vector> = Vec::new();
        let mut ortho: Vec<Vector> = Vec::new();
        for c in constraints {
            let mut v = c;
            for o in &ortho {
                v -= o * o.dot(&v);
            }
            if v.norm() > 1e-12 {
                ortho.push(v.normalize());
            }
        }
        for i in 0..dim {
            let mut v = Vector::zeros();
            v[i] = 1.0;
            for o in ortho.iter().chain(basis.iter()) {
                v -= o * o.dot(&v);
            }
            if v.norm() > 1e-9 {
                basis.push(v.normalize());
            }
        }
        basis
    }
}

/// A closed characteristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub base: [f64; 4],
    /// Period in `parametrization`.
    pub period: f64,
    /// Period in the other parametrization.
    pub alternate_period: f64,
    pub parametrization: Parametrization,
    /// `∮ α` along the loop.
    pub action: f64,
    /// Chart distance between the base point and its image after one period.
    pub residual: f64,
    /// Number of merged representatives of a degenerate family.
    pub multiplicity: usize,
    pub contractible: bool,
}

impl OrbitRecord {
    pub fn base_point(&self) -> Point {
        Point::from(self.base)
    }

    pub fn period_in(&self, param: Parametrization) -> f64 {
        if param == self.parametrization {
            self.period
        } else {
            self.alternate_period
        }
    }

    pub fn characteristic_period(&self) -> f64 {
        self.period_in(Parametrization::CharacteristicField)
    }

    pub fn hamiltonian_period(&self) -> f64 {
        self.period_in(Parametrization::HamiltonianField)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSearchOptions {
    pub seeds: usize,
    pub max_period: f64,
    /// Closure tolerance for accepted orbits.
    pub tol: f64,
    pub seed: u64,
    pub parametrization: Parametrization,
    /// Returns closer than this (chart units) are refined.
    pub candidate_threshold: f64,
    pub candidates_per_seed: usize,
    pub newton_iterations: usize,
}

impl Default for OrbitSearchOptions {
    fn default() -> Self {
        Self {
            seeds: 16,
            max_period: 10.0,
            tol: 1e-8,
            seed: 0,
            parametrization: Parametrization::CharacteristicField,
            candidate_threshold: 0.5,
            candidates_per_seed: 2,
            newton_iterations: 30,
        }
    }
}

fn integrator_tol(tol: f64) -> f64 {
    (tol * 1e-3).clamp(1e-13, 1e-8)
}

/// Auxiliary integrals carried along loops: `α(V)` and the speed ratio
/// giving elapsed time of the other parametrization.
fn loop_aux(model: &Model, param: Parametrization) -> impl Fn(&Point, &Vector, &mut [f64]) -> Result<()> + Sync + '_ {
    move |p, v, out| {
        out[0] = model.alpha.eval(p, &[*v])?;
        let l = speed_factor(model, p, Parametrization::HamiltonianField);
        out[1] = match param {
            Parametrization::CharacteristicField => 1.0 / l,
            Parametrization::HamiltonianField => l,
        };
        Ok(())
    }
}

fn max_jump(model: &Model) -> f64 {
    if model.periodic_axes().is_empty() {
        f64::INFINITY
    } else {
        PI
    }
}

/// Whether a loop whose lift closes with the given deck element and
/// unwrapped displacement is null-homotopic.
fn loop_contractible(model: &Model, deck: Option<&Matrix2<f64>>, winding: &Vector) -> bool {
    match &model.kind {
        ModelKind::LevelSet(_) => true,
        ModelKind::T3Contact | ModelKind::MagneticTorus(_) => winding.iter().all(|w| w.abs() < PI),
        ModelKind::HyperbolicUtb { .. } => {
            let trivial = deck.map_or(true, |g| {
                (g - Matrix2::identity()).norm() < 1e-6 || (g + Matrix2::identity()).norm() < 1e-6
            });
            trivial && winding[2].abs() < PI
        }
    }
}

struct Return {
    t: f64,
    point: Point,
    action: f64,
    other_time: f64,
    contractible: bool,
}

/// The `k`-th crossing of the section by the orbit of `p0`.
fn nth_return(model: &Model, section: &SectionSpec, p0: &Point, k: usize, max_period: f64, param: Parametrization, tol: f64) -> Result<Option<Return>> {
    let returns = returns_up_to(model, section, p0, k, max_period, param, tol)?;
    Ok(returns.into_iter().nth(k - 1))
}

fn returns_up_to(model: &Model, section: &SectionSpec, p0: &Point, max_events: usize, max_period: f64, param: Parametrization, tol: f64) -> Result<Vec<Return>> {
    let opts = IntegratorOptions {
        record: false,
        ..IntegratorOptions::with_tol(integrator_tol(tol))
    };
    let aux = loop_aux(model, param);
    let func = |p: &Point| section.value(model, p);
    let origin = section.origin();
    let speed = characteristic_field(model, p0)?.norm() * speed_factor(model, p0, param);
    let run = Run {
        model,
        param,
        opts: &opts,
        aux_dim: 2,
        aux_fn: Some(&aux),
        stops: &[],
        event: Some(EventSpec {
            func: &func,
            direction: section.direction,
            t_min: 1e-6 / speed.max(1e-12),
            max_events,
            max_jump: max_jump(model),
        }),
    };
    let out = run.execute(p0, max_period)?;
    Ok(out
        .events
        .into_iter()
        .filter(|e| {
            section
                .radius
                .map_or(true, |r| model.displacement(&origin, &e.point).norm() <= r)
        })
        .map(|e| Return {
            t: e.t,
            point: e.point,
            action: e.aux[0],
            other_time: e.aux[1],
            contractible: loop_contractible(model, e.deck.as_ref(), &e.winding),
        })
        .collect())
}

fn pseudo_inverse_solve(j: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = smax * 1e-8;
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    let mut out = DVector::zeros(j.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            let coef = u.column(i).dot(r) / s;
            out += vt.row(i).transpose() * coef;
        }
    }
    out
}

/// Damped Gauss–Newton on the `k`-th return displacement.
fn refine(model: &Model, section: &SectionSpec, start: &Point, k: usize, opts: &OrbitSearchOptions) -> Result<Option<OrbitRecord>> {
    let dim = model.coord_dim();
    let basis = section.tangent_basis(dim);
    let anchor = *start;
    let point_of = |q: &DVector<f64>| -> Point {
        let mut p = anchor;
        for (i, b) in basis.iter().enumerate() {
            p += b * q[i];
        }
        section.project(model, &p)
    };
    let residual = |q: &DVector<f64>| -> Result<Option<(DVector<f64>, Return)>> {
        let p = point_of(q);
        let ret = match nth_return(model, section, &p, k, opts.max_period, opts.parametrization, opts.tol)? {
            Some(r) => r,
            None => return Ok(None),
        };
        let d = model.displacement(&p, &ret.point);
        Ok(Some((DVector::from_iterator(dim, d.iter().take(dim).copied()), ret)))
    };
    let mut q = DVector::zeros(basis.len());
    let Some((mut r, mut ret)) = residual(&q)? else {
        return Ok(None);
    };
    let fd = 1e-6;
    for _ in 0..opts.newton_iterations {
        if r.norm() < opts.tol * 0.1 {
            break;
        }
        let mut jac = DMatrix::zeros(dim, basis.len());
        for c in 0..basis.len() {
            let mut qp = q.clone();
            qp[c] += fd;
            let mut qm = q.clone();
            qm[c] -= fd;
            match (residual(&qp)?, residual(&qm)?) {
                (Some((rp, _)), Some((rm, _))) => {
                    let col = (rp - rm) / (2.0 * fd);
                    jac.set_column(c, &col);
                }
                _ => return Ok(None),
            }
        }
        let step = pseudo_inverse_solve(&jac, &r);
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-4 {
            let trial = &q - &step * lambda;
            if let Some((rt, rett)) = residual(&trial)? {
                if rt.norm() < r.norm() {
                    q = trial;
                    r = rt;
                    ret = rett;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if r.norm() >= opts.tol {
        log::debug!("refinement from {start:?} stalled at residual {:.3e}", r.norm());
        return Ok(None);
    }
    let base = point_of(&q);
    // multiply covered loops close at an earlier return
    if k > 1 {
        let earlier = returns_up_to(model, section, &base, k - 1, opts.max_period, opts.parametrization, opts.tol)?;
        if let Some(e) = earlier.into_iter().find(|e| model.displacement(&base, &e.point).norm() < opts.tol) {
            r = DVector::from_iterator(dim, model.displacement(&base, &e.point).iter().take(dim).copied());
            ret = e;
        }
    }
    Ok(Some(OrbitRecord {
        base: base.into(),
        period: ret.t,
        alternate_period: ret.other_time,
        parametrization: opts.parametrization,
        action: ret.action,
        residual: r.norm(),
        multiplicity: 1,
        contractible: ret.contractible,
    }))
}

/// Points along the loop at `n` equally spaced times.
pub fn resample_loop(model: &Model, orbit: &OrbitRecord, n: usize, tol: f64) -> Result<Vec<Point>> {
    let stops: Vec<f64> = (0..n).map(|i| orbit.period * i as f64 / n as f64).collect();
    let opts = IntegratorOptions {
        record: false,
        ..IntegratorOptions::with_tol(integrator_tol(tol))
    };
    let run = Run {
        model,
        param: orbit.parametrization,
        opts: &opts,
        aux_dim: 0,
        aux_fn: None,
        stops: &stops,
        event: None,
    };
    Ok(run.execute(&orbit.base_point(), orbit.period)?.points_at_stops)
}

/// Minimal chart distance from `p` to the resampled loop.
fn distance_to_loop(model: &Model, p: &Point, pts: &[Point]) -> f64 {
    pts.iter()
        .map(|q| model.displacement(q, p).norm())
        .fold(f64::INFINITY, f64::min)
}

const DEDUP_DISTANCE: f64 = 1e-3;

fn period_multiple(a: f64, b: f64) -> bool {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let m = (hi / lo).round();
    m >= 1.0 && (hi - m * lo).abs() <= 1e-5 * hi
}

/// Merges numerical twins (same loop) and collapses degenerate families
/// (same period and action) into one representative.
pub fn deduplicate(model: &Model, records: Vec<OrbitRecord>, tol: f64) -> Result<Vec<OrbitRecord>> {
    let mut recs = records;
    recs.sort_by(|a, b| a.period.total_cmp(&b.period));
    let mut kept: Vec<(OrbitRecord, Vec<Point>)> = Vec::new();
    'outer: for r in recs {
        let p = r.base_point();
        for (k, pts) in kept.iter_mut() {
            if period_multiple(k.period, r.period) && distance_to_loop(model, &p, pts) < DEDUP_DISTANCE {
                continue 'outer;
            }
            let same_period = (k.period - r.period).abs() <= 1e-6 * k.period;
            let same_action = (k.action - r.action).abs() <= 1e-6 * (1.0 + k.action.abs());
            if same_period && same_action {
                k.multiplicity += 1;
                continue 'outer;
            }
        }
        let pts = resample_loop(model, &r, 256, tol)?;
        kept.push((r, pts));
    }
    Ok(kept.into_iter().map(|(r, _)| r).collect())
}

/// Seeds on the section from a shifted Halton sequence.
fn section_seeds(model: &Model, section: &SectionSpec, n: usize, seed: u64) -> Vec<Point> {
    let shift = {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()]
    };
    (0..n)
        .map(|i| {
            let u = halton(i as u64 + 1, shift);
            let (p, _) = model.map_unit_cube(u);
            section.project(model, &p)
        })
        .collect()
}

/// Closed characteristics found from seeds on a section.
pub fn find_periodic_orbits(model: &Model, section: &SectionSpec, opts: &OrbitSearchOptions) -> Result<Vec<OrbitRecord>> {
    if !(opts.max_period > 0.0) || !(opts.tol > 0.0) {
        return Err(CharflowError::InvalidArgument("max period and tolerance must be positive".into()));
    }
    if section.normal().norm() == 0.0 {
        return Err(CharflowError::InvalidArgument("section normal must be nonzero".into()));
    }
    let seeds = section_seeds(model, section, opts.seeds, opts.seed);
    let found: Vec<Result<Vec<OrbitRecord>>> = seeds
        .par_iter()
        .map(|p0| {
            let returns = returns_up_to(model, section, p0, usize::MAX, opts.max_period, opts.parametrization, opts.tol)?;
            let mut cands: Vec<(usize, f64)> = returns
                .iter()
                .enumerate()
                .map(|(i, r)| (i + 1, model.displacement(p0, &r.point).norm()))
                .filter(|(_, d)| *d < opts.candidate_threshold)
                .collect();
            cands.sort_by(|a, b| a.1.total_cmp(&b.1));
            let mut out = Vec::new();
            for &(k, _) in cands.iter().take(opts.candidates_per_seed) {
                match refine(model, section, p0, k, opts) {
                    Ok(Some(r)) => out.push(r),
                    Ok(None) => {}
                    Err(e) => log::debug!("candidate dropped: {e}"),
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for f in found {
        all.extend(f?);
    }
    deduplicate(model, all, opts.tol)
}

/// `∮ α` along the orbit, integrated in the given parametrization.
pub fn orbit_action(model: &Model, orbit: &OrbitRecord, param: Parametrization) -> Result<f64> {
    orbit_integral(model, orbit, param, &|p, v| model.alpha.eval(p, &[*v]))
}

/// `∮ β(V) dt` for any 1-form-like integrand over one period.
pub(crate) fn orbit_integral(
    model: &Model,
    orbit: &OrbitRecord,
    param: Parametrization,
    integrand: &(dyn Fn(&Point, &Vector) -> Result<f64> + Sync),
) -> Result<f64> {
    let period = orbit.period_in(param);
    let opts = IntegratorOptions {
        record: false,
        ..IntegratorOptions::with_tol(1e-12)
    };
    let aux = |p: &Point, v: &Vector, out: &mut [f64]| -> Result<()> {
        out[0] = integrand(p, v)?;
        Ok(())
    };
    let run = Run {
        model,
        param,
        opts: &opts,
        aux_dim: 1,
        aux_fn: Some(&aux),
        stops: &[],
        event: None,
    };
    Ok(run.execute(&orbit.base_point(), period)?.final_aux[0])
}

/// The closed orbit through `p0`, detected as the first return to the
/// local normal plane within `radius`; `None` when it does not close.
pub fn closed_orbit_through(model: &Model, p0: &Point, max_period: f64, tol: f64, param: Parametrization) -> Result<Option<OrbitRecord>> {
    let (p0, _) = model.reduce(&model.project(p0))?;
    let x = characteristic_field(model, &p0)?;
    let mut section = SectionSpec::new(p0, x.normalize());
    section.radius = Some(0.1);
    let returns = returns_up_to(model, &section, &p0, 64, max_period, param, tol)?;
    let Some(ret) = returns.into_iter().next() else {
        return Ok(None);
    };
    let residual = model.displacement(&p0, &ret.point).norm();
    if residual >= tol {
        return Ok(None);
    }
    Ok(Some(OrbitRecord {
        base: p0.into(),
        period: ret.t,
        alternate_period: ret.other_time,
        parametrization: param,
        action: ret.action,
        residual,
        multiplicity: 1,
        contractible: ret.contractible,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_t3_contact, build_levelset, LevelSetSpec};

    #[test]
    fn torus_circle_action() {
        let m = build_t3_contact().unwrap();
        let orbit = closed_orbit_through(&m, &Point::zeros(), 10.0, 1e-8, Parametrization::CharacteristicField)
            .unwrap()
            .expect("z = 0 circle closes");
        assert!((orbit.period - 2.0 * PI).abs() < 1e-8);
        assert!((orbit.action + 2.0 * PI).abs() < 1e-8);
        assert!(!orbit.contractible);
    }

    #[test]
    fn sphere_orbit_action_both_parametrizations() {
        let m = build_levelset(LevelSetSpec::sphere()).unwrap();
        let p = Point::new(0.6, 0.0, 0.0, 0.8);
        let o = closed_orbit_through(&m, &p, 10.0, 1e-8, Parametrization::CharacteristicField).unwrap().unwrap();
        assert!((o.period - 2.0 * PI).abs() < 1e-8);
        assert!((o.action - PI).abs() < 1e-8);
        let a_h = orbit_action(&m, &o, Parametrization::HamiltonianField).unwrap();
        assert!((a_h - o.action).abs() < 1e-8 * o.action.abs());
        assert!(o.contractible);
    }

    #[test]
    fn tangent_basis_excludes_frozen() {
        let s = SectionSpec::new(Point::zeros(), Vector::new(1.0, 0.0, 0.0, 0.0)).with_frozen(&[2]);
        let b = s.tangent_basis(3);
        assert_eq!(b.len(), 1);
        assert!((b[0][1].abs() - 1.0).abs() < 1e-15);
    }
}
