//! Quadrature of top-degree forms over a model.
//!
//! Every model maps the unit cube onto its manifold (up to a null set) with a
//! known density against μ; grid rules are tensor products of per-axis rules
//! on that cube and Monte Carlo draws stratified samples from it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::FormField;
use crate::error::{CharflowError, Result};
use crate::models::Model;
use crate::Point;

/// Quadrature scheme for integrals over a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Tensor-product rule with `resolution` nodes per axis (before axis
    /// subdivision); the error estimate compares against half resolution.
    Grid { resolution: usize },
    /// Stratified Monte Carlo with `samples` points drawn from `seed`.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Grid { .. } => "grid",
            Scheme::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

/// Per-axis rule on the unit interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisRule {
    /// Periodic integrand: equispaced trapezoid rule.
    Periodic,
    /// Smooth on each of `pieces` equal subintervals: composite Gauss–Legendre.
    Interval { pieces: usize },
}

/// A computed integral with its error estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    /// Standard error (Monte Carlo) or Richardson difference (grid), plus a
    /// rounding bound.
    pub error: f64,
    pub rounding: f64,
    pub nodes: usize,
    pub min_density: f64,
    pub max_density: f64,
    pub scheme: Scheme,
}

impl IntegralEstimate {
    /// Three combined standard errors.
    pub fn tolerance_with(&self, other: &IntegralEstimate) -> f64 {
        3.0 * self.error.hypot(other.error)
    }
}

/// A pointwise sample of an integrand density against μ.
#[derive(Clone, Copy, Debug)]
pub struct DensitySample {
    pub value: f64,
    /// Magnitude of the terms that produced `value`, for rounding bounds.
    pub bound: f64,
}

impl DensitySample {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            bound: value.abs(),
        }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub fn axis_nodes(rule: AxisRule, resolution: usize) -> Vec<(f64, f64)> {
    match rule {
        AxisRule::Periodic => {
            let n = resolution.max(1);
            (0..n).map(|i| (i as f64 / n as f64, 1.0 / n as f64)).collect()
        }
        AxisRule::Interval { pieces } => {
            let pieces = pieces.max(1);
            let order = if pieces == 1 {
                resolution.max(2)
            } else {
                (resolution.div_ceil(pieces) * 2).max(4)
            };
            let base = gauss_legendre(order);
            let width = 1.0 / pieces as f64;
            (0..pieces)
                .flat_map(|k| {
                    base.iter()
                        .map(move |&(x, w)| ((k as f64 + x) * width, w * width))
                })
                .collect()
        }
    }
}

/// Radical-inverse Halton point in base 2, 3, 5 with a Cranley–Patterson shift.
pub fn halton(index: u64, shift: [f64; 3]) -> [f64; 3] {
    const BASES: [u64; 3] = [2, 3, 5];
    let mut out = [0.0; 3];
    for (d, &b) in BASES.iter().enumerate() {
        let mut i = index + 1;
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        out[d] = (r + shift[d]).fract();
    }
    out
}

#[derive(Clone, Copy)]
struct Partial {
    sum: f64,
    variance: f64,
    bound: f64,
    nodes: usize,
    min: f64,
    max: f64,
}

impl Partial {
    fn empty() -> Self {
        Self {
            sum: 0.0,
            variance: 0.0,
            bound: 0.0,
            nodes: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn merge(mut self, o: &Partial) -> Self {
        self.sum += o.sum;
        self.variance += o.variance;
        self.bound += o.bound;
        self.nodes += o.nodes;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
        self
    }
}

fn grid_partial<F>(model: &Model, resolution: usize, density: &F) -> Result<Partial>
where
    F: Fn(&Point) -> Result<DensitySample> + Sync,
{
    let rules = model.axis_rules();
    let ax: Vec<Vec<(f64, f64)>> = rules.iter().map(|&r| axis_nodes(r, resolution)).collect();
    let rows: Vec<Result<Partial>> = ax[0]
        .par_iter()
        .map(|&(u0, w0)| {
            let mut part = Partial::empty();
            for &(u1, w1) in &ax[1] {
                for &(u2, w2) in &ax[2] {
                    let (p, jac) = model.map_unit_cube([u0, u1, u2]);
                    let w = w0 * w1 * w2 * jac;
                    let s = density(&p)?;
                    part.sum += w * s.value;
                    part.bound += w.abs() * s.bound;
                    part.nodes += 1;
                    part.min = part.min.min(s.value);
                    part.max = part.max.max(s.value);
                }
            }
            Ok(part)
        })
        .collect();
    let mut total = Partial::empty();
    for r in rows {
        total = total.merge(&r?);
    }
    Ok(total)
}

const STRATA_PER_TASK: usize = 2048;

fn monte_carlo_partial<F>(model: &Model, samples: usize, seed: u64, density: &F) -> Result<Partial>
where
    F: Fn(&Point) -> Result<DensitySample> + Sync,
{
    let per_axis = (((samples / 2) as f64).cbrt().floor() as usize).max(1);
    let strata = per_axis.pow(3);
    let per_stratum = (samples / strata).max(2);
    let width = 1.0 / per_axis as f64;
    let tasks: Vec<usize> = (0..strata.div_ceil(STRATA_PER_TASK)).collect();
    let parts: Vec<Result<Partial>> = tasks
        .par_iter()
        .map(|&task| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(task as u64);
            let mut part = Partial::empty();
            let lo = task * STRATA_PER_TASK;
            let hi = (lo + STRATA_PER_TASK).min(strata);
            let mut ys = Vec::with_capacity(per_stratum);
            for s in lo..hi {
                let (i, j, k) = (s / (per_axis * per_axis), (s / per_axis) % per_axis, s % per_axis);
                ys.clear();
                for _ in 0..per_stratum {
                    let u = [
                        (i as f64 + rng.gen::<f64>()) * width,
                        (j as f64 + rng.gen::<f64>()) * width,
                        (k as f64 + rng.gen::<f64>()) * width,
                    ];
                    let (p, jac) = model.map_unit_cube(u);
                    let d = density(&p)?;
                    // stratum volume is width³ = 1/strata
                    let y = jac * d.value / strata as f64;
                    ys.push(y);
                    part.bound += (jac / strata as f64).abs() * d.bound / per_stratum as f64;
                    part.min = part.min.min(d.value);
                    part.max = part.max.max(d.value);
                }
                let n = ys.len() as f64;
                let mean = ys.iter().sum::<f64>() / n;
                let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
                part.sum += mean;
                part.variance += var / n;
                part.nodes += ys.len();
            }
            Ok(part)
        })
        .collect();
    let mut total = Partial::empty();
    for p in parts {
        total = total.merge(&p?);
    }
    Ok(total)
}

fn rounding_bound(bound: f64, nodes: usize) -> f64 {
    64.0 * f64::EPSILON * bound * (1.0 + (nodes as f64).log2())
}

/// `∫_M g μ` for a density `g` given pointwise.
pub fn integrate_density<F>(model: &Model, scheme: Scheme, density: F) -> Result<IntegralEstimate>
where
    F: Fn(&Point) -> Result<DensitySample> + Sync,
{
    model.check_scheme(scheme)?;
    match scheme {
        Scheme::Grid { resolution } => {
            if resolution < 2 {
                return Err(CharflowError::InvalidArgument(
                    "grid resolution must be at least 2".into(),
                ));
            }
            let fine = grid_partial(model, resolution, &density)?;
            let coarse = grid_partial(model, resolution / 2, &density)?;
            let rounding = rounding_bound(fine.bound, fine.nodes);
            Ok(IntegralEstimate {
                value: fine.sum,
                error: (fine.sum - coarse.sum).abs() + rounding,
                rounding,
                nodes: fine.nodes,
                min_density: fine.min,
                max_density: fine.max,
                scheme,
            })
        }
        Scheme::MonteCarlo { samples, seed } => {
            if samples < 16 {
                return Err(CharflowError::InvalidArgument(
                    "monte carlo needs at least 16 samples".into(),
                ));
            }
            let part = monte_carlo_partial(model, samples, seed, &density)?;
            let rounding = rounding_bound(part.bound, part.nodes);
            Ok(IntegralEstimate {
                value: part.sum,
                error: part.variance.sqrt() + rounding,
                rounding,
                nodes: part.nodes,
                min_density: part.min,
                max_density: part.max,
                scheme,
            })
        }
    }
}

/// `∫_M η` for a top-degree form `η`, signed against the model orientation.
pub fn integrate_top_form(model: &Model, field: &FormField, scheme: Scheme) -> Result<IntegralEstimate> {
    if field.degree() != 3 || field.dim() != model.coord_dim() {
        return Err(CharflowError::FormMismatch(format!(
            "integrand `{}` must be a 3-form in chart dimension {}",
            field.label(),
            model.coord_dim()
        )));
    }
    integrate_density(model, scheme, |p| {
        let frame = model.frame(p);
        let (v, b) = field.at(p).eval_with_bound(&frame, None)?;
        let m = model.mu_density(p, &frame);
        Ok(DensitySample {
            value: v / m,
            bound: b / m.abs(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(5);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
        // ∫_0^1 x^9 = 0.1, exact for 5 nodes
        let v: f64 = rule.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn composite_axis_covers_unit_interval() {
        let nodes = axis_nodes(AxisRule::Interval { pieces: 16 }, 32);
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(nodes.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn halton_points_are_in_cube_and_distinct() {
        let a = halton(0, [0.0; 3]);
        let b = halton(1, [0.0; 3]);
        assert_eq!(a, [0.5, 1.0 / 3.0, 0.2]);
        assert!(b.iter().all(|x| (0.0..1.0).contains(x)));
        assert_ne!(a, b);
    }
}
