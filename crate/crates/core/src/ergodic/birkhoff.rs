//! Time averages along characteristic orbits, space averages against μ and
//! the empirical unique-ergodicity diagnostic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{characteristic_field, speed_factor, IntegratorOptions, Parametrization, Run};
use crate::error::{CharflowError, Result};
use crate::forms::{integrate_density, DensitySample, FormField, IntegralEstimate, ScalarFunction, Scheme};
use crate::models::Model;
use crate::{Point, Vector};

/// A function on the model evaluated along the flow.
#[derive(Clone)]
pub enum Observable {
    /// `f(p)`.
    Scalar(ScalarFunction),
    /// `β(X(p))` for a 1-form `β` and the characteristic field `X`.
    Contraction(FormField),
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Scalar(f) => f.label().to_string(),
            Observable::Contraction(b) => format!("{}(X)", b.label()),
        }
    }

    /// Value at `p`, given the characteristic field `x` there.
    pub fn eval(&self, p: &Point, x: &Vector) -> Result<f64> {
        match self {
            Observable::Scalar(f) => Ok(f.value(p)),
            Observable::Contraction(b) => b.eval(p, &[*x]),
        }
    }

    fn eval_at(&self, model: &Model, p: &Point) -> Result<f64> {
        match self {
            Observable::Scalar(f) => Ok(f.value(p)),
            Observable::Contraction(b) => b.eval(p, &[characteristic_field(model, p)?]),
        }
    }
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Observable({})", self.label())
    }
}

/// Low modes of the model's function basis, `β(X)` for the H¹ basis and
/// the action density `α(X)`.
pub fn observable_battery(model: &Model, cap: usize) -> Vec<Observable> {
    let mut out: Vec<Observable> = model.function_basis(cap).into_iter().map(Observable::Scalar).collect();
    out.extend(model.h1_basis.iter().cloned().map(Observable::Contraction));
    out.push(Observable::Contraction(model.alpha.clone()));
    out
}

/// A default grid for space averages on the model.
pub fn default_scheme(_model: &Model) -> Scheme {
    Scheme::Grid { resolution: 24 }
}

fn average_opts(tol: f64) -> IntegratorOptions {
    IntegratorOptions {
        record: false,
        ..IntegratorOptions::with_tol(tol)
    }
}

/// `(1/T) ∫₀ᵀ f(x(t)) dt` at each horizon, for every observable, from one
/// integration. Rows are horizons.
pub fn birkhoff_averages(
    model: &Model,
    observables: &[Observable],
    x0: &Point,
    horizons: &[f64],
    param: Parametrization,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    if horizons.iter().any(|t| !(*t > 0.0)) {
        return Err(CharflowError::InvalidArgument("horizons must be positive".into()));
    }
    let aux = |p: &Point, v: &Vector, out: &mut [f64]| -> Result<()> {
        let x = v / speed_factor(model, p, param);
        for (o, f) in out.iter_mut().zip(observables) {
            *o = f.eval(p, &x)?;
        }
        Ok(())
    };
    let opts = average_opts(tol);
    let t_end = horizons.iter().copied().fold(0.0, f64::max);
    let run = Run {
        model,
        param,
        opts: &opts,
        aux_dim: observables.len(),
        aux_fn: Some(&aux),
        stops: horizons,
        event: None,
    };
    let out = run.execute(x0, t_end)?;
    // stops come back in increasing order
    let mut sorted: Vec<f64> = horizons.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(horizons
        .iter()
        .map(|h| {
            let i = sorted.iter().position(|s| s == h).unwrap_or(0);
            out.aux_at_stops[i].iter().map(|s| s / h).collect()
        })
        .collect())
}

/// `(1/T) ∫₀ᵀ f(x(t)) dt` along the orbit of `x0`.
pub fn birkhoff_average(model: &Model, f: &Observable, x0: &Point, t: f64, param: Parametrization) -> Result<f64> {
    let rows = birkhoff_averages(model, std::slice::from_ref(f), x0, &[t], param, 1e-9)?;
    Ok(rows[0][0])
}

/// `∫ f μ / ∫ μ`. `min_density` and `max_density` hold the sampled range of `f`.
pub fn space_average(model: &Model, f: &Observable, scheme: Scheme) -> Result<IntegralEstimate> {
    let num = integrate_density(model, scheme, |p| Ok(DensitySample::exact(f.eval_at(model, p)?)))?;
    let vol = integrate_density(model, scheme, |_| Ok(DensitySample::exact(1.0)))?;
    let value = num.value / vol.value;
    Ok(IntegralEstimate {
        value,
        error: (num.error + value.abs() * vol.error) / vol.value.abs(),
        rounding: num.rounding / vol.value.abs(),
        ..num
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithUniqueErgodicity,
    NotUniquelyErgodicEvidence,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Final-horizon deviation, in units of the observable's range, above
    /// which a non-decaying curve counts against unique ergodicity.
    pub fail_threshold: f64,
    /// Required factor of decrease per decade of horizon.
    pub decay_per_decade: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            fail_threshold: 0.1,
            decay_per_decade: 0.5,
        }
    }
}

/// Deviations below this are indistinguishable from quadrature noise.
const DEVIATION_FLOOR: f64 = 1e-9;

/// Verdict from a max-deviation curve; a pure function of its inputs.
pub fn verdict_from(horizons: &[f64], max_deviation: &[f64], thresholds: &Thresholds) -> Verdict {
    let decays = horizons.windows(2).zip(max_deviation.windows(2)).all(|(t, d)| {
        let decades = (t[1] / t[0]).log10();
        d[1] <= DEVIATION_FLOOR || d[1] <= d[0] * thresholds.decay_per_decade.powf(decades)
    });
    let last = max_deviation.last().copied().unwrap_or(0.0);
    if decays {
        Verdict::ConsistentWithUniqueErgodicity
    } else if last > thresholds.fail_threshold {
        Verdict::NotUniquelyErgodicEvidence
    } else {
        Verdict::Inconclusive
    }
}

/// Empirical evidence about unique ergodicity; never a proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub observables: Vec<String>,
    pub seeds: Vec<[f64; 4]>,
    pub horizons: Vec<f64>,
    pub parametrization: Parametrization,
    pub space_averages: Vec<f64>,
    pub space_errors: Vec<f64>,
    /// Sampled `max − min` of each observable.
    pub ranges: Vec<f64>,
    /// `|time average − space average|`, indexed `[horizon][observable][seed]`.
    pub deviations: Vec<Vec<Vec<f64>>>,
    /// Max over observables and seeds of the range-normalized deviation.
    pub max_deviation: Vec<f64>,
    pub thresholds: Thresholds,
    pub integrator_tol: f64,
    pub verdict: Verdict,
}

impl DiagnosticReport {
    pub fn recompute_verdict(&self) -> Verdict {
        verdict_from(&self.horizons, &normalized_max(&self.deviations, &self.ranges, &self.space_averages), &self.thresholds)
    }

    /// `(horizon, max deviation)` rows.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.horizons.iter().copied().zip(self.max_deviation.iter().copied()).collect()
    }
}

fn normalized_max(deviations: &[Vec<Vec<f64>>], ranges: &[f64], means: &[f64]) -> Vec<f64> {
    deviations
        .iter()
        .map(|by_obs| {
            by_obs
                .iter()
                .zip(ranges.iter().zip(means))
                .filter(|(_, (r, m))| **r > 1e-9 * (1.0 + m.abs()))
                .flat_map(|(by_seed, (r, _))| by_seed.iter().map(move |d| d / r))
                .fold(0.0, f64::max)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DiagnosticOptions {
    pub parametrization: Parametrization,
    pub tol: f64,
    pub scheme: Option<Scheme>,
    pub thresholds: Thresholds,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self {
            parametrization: Parametrization::CharacteristicField,
            tol: 1e-8,
            scheme: None,
            thresholds: Thresholds::default(),
        }
    }
}

/// Compares time averages from each seed with space averages over a set of
/// horizons.
pub fn ue_diagnostic(
    model: &Model,
    observables: &[Observable],
    seeds: &[Point],
    horizons: &[f64],
    opts: &DiagnosticOptions,
) -> Result<DiagnosticReport> {
    if observables.len() < 3 {
        return Err(CharflowError::InvalidArgument("ue diagnostic needs at least 3 observables".into()));
    }
    if seeds.len() < 8 {
        return Err(CharflowError::InvalidArgument("ue diagnostic needs at least 8 seeds".into()));
    }
    if horizons.len() < 3 || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] <= 0.0 {
        return Err(CharflowError::InvalidArgument(
            "ue diagnostic needs at least 3 increasing positive horizons".into(),
        ));
    }
    let scheme = opts.scheme.unwrap_or_else(|| default_scheme(model));
    let spaces: Vec<IntegralEstimate> = observables
        .iter()
        .map(|f| space_average(model, f, scheme))
        .collect::<Result<_>>()?;
    let per_seed: Vec<Result<Vec<Vec<f64>>>> = seeds
        .par_iter()
        .map(|x0| birkhoff_averages(model, observables, x0, horizons, opts.parametrization, opts.tol))
        .collect();
    let per_seed: Vec<Vec<Vec<f64>>> = per_seed.into_iter().collect::<Result<_>>()?;
    let deviations: Vec<Vec<Vec<f64>>> = (0..horizons.len())
        .map(|h| {
            (0..observables.len())
                .map(|o| per_seed.iter().map(|s| (s[h][o] - spaces[o].value).abs()).collect())
                .collect()
        })
        .collect();
    let space_averages: Vec<f64> = spaces.iter().map(|s| s.value).collect();
    let ranges: Vec<f64> = spaces.iter().map(|s| s.max_density - s.min_density).collect();
    let max_deviation = normalized_max(&deviations, &ranges, &space_averages);
    let verdict = verdict_from(horizons, &max_deviation, &opts.thresholds);
    Ok(DiagnosticReport {
        observables: observables.iter().map(|o| o.label()).collect(),
        seeds: seeds.iter().map(|p| (*p).into()).collect(),
        horizons: horizons.to_vec(),
        parametrization: opts.parametrization,
        space_errors: spaces.iter().map(|s| s.error).collect(),
        space_averages,
        ranges,
        deviations,
        max_deviation,
        thresholds: opts.thresholds,
        integrator_tol: opts.tol,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_t3_contact;

    #[test]
    fn verdict_rules() {
        let th = Thresholds::default();
        let hs = [1e2, 1e3, 1e4];
        assert_eq!(verdict_from(&hs, &[0.4, 0.1, 0.02], &th), Verdict::ConsistentWithUniqueErgodicity);
        assert_eq!(verdict_from(&hs, &[0.5, 0.5, 0.5], &th), Verdict::NotUniquelyErgodicEvidence);
        assert_eq!(verdict_from(&hs, &[0.05, 0.04, 0.04], &th), Verdict::Inconclusive);
        assert_eq!(verdict_from(&hs, &[0.0, 0.0, 0.0], &th), Verdict::ConsistentWithUniqueErgodicity);
    }

    #[test]
    fn constant_and_conserved_averages() {
        let m = build_t3_contact().unwrap();
        let one = Observable::Scalar(ScalarFunction::new("one", 3, |_| 3.25));
        let x0 = Point::new(0.3, 1.0, 0.7, 0.0);
        let a = birkhoff_average(&m, &one, &x0, 17.0, Parametrization::CharacteristicField).unwrap();
        assert!((a - 3.25).abs() < 1e-13);
        let cz = Observable::Scalar(ScalarFunction::new("cos z", 3, |p| p[2].cos()));
        let a = birkhoff_average(&m, &cz, &x0, 50.0, Parametrization::CharacteristicField).unwrap();
        assert!((a - 0.7f64.cos()).abs() < 1e-12);
        let s = space_average(&m, &cz, Scheme::Grid { resolution: 16 }).unwrap();
        assert!(s.value.abs() < 1e-9);
        let s = space_average(&m, &one, Scheme::Grid { resolution: 8 }).unwrap();
        assert!((s.value - 3.25).abs() < 1e-12);
    }

    #[test]
    fn torus_is_not_uniquely_ergodic() {
        let m = build_t3_contact().unwrap();
        let obs = observable_battery(&m, 1);
        let seeds: Vec<Point> = (0..8).map(|i| Point::new(0.1 * i as f64, 0.2, 0.0, 0.0)).collect();
        let r = ue_diagnostic(&m, &obs, &seeds, &[10.0, 100.0, 1000.0], &DiagnosticOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotUniquelyErgodicEvidence);
        assert_eq!(r.recompute_verdict(), r.verdict);
        assert!(r.max_deviation.iter().all(|d| *d >= 0.45));
    }

    #[test]
    fn preconditions_enforced() {
        let m = build_t3_contact().unwrap();
        let obs = observable_battery(&m, 1);
        let seeds = vec![Point::zeros(); 3];
        assert!(ue_diagnostic(&m, &obs, &seeds, &[1.0, 2.0, 3.0], &DiagnosticOptions::default()).is_err());
    }
}
