//! Structure currents `β ↦ ∫ β(X) dν`, the structure-boundary test and the
//! current action.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::birkhoff::{birkhoff_averages, default_scheme, Observable};
use crate::dynamics::{characteristic_field, orbit_integral, OrbitRecord, Parametrization, Trajectory};
use crate::error::Result;
use crate::forms::{integrate_density, DensitySample, FormField, ScalarFunction, Scheme};
use crate::models::Model;
use crate::{Point, Vector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitNormalization {
    /// Probability measure: the loop integral divided by the recorded period.
    #[default]
    Period,
    /// Plain loop integral.
    None,
}

/// An invariant-measure candidate ν.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// μ itself, or μ / vol(M) when `normalized`.
    Volume {
        scheme: Scheme,
        #[serde(default)]
        normalized: bool,
    },
    /// Time average along the orbit of `start` up to `horizon`.
    Empirical {
        start: [f64; 4],
        horizon: f64,
        parametrization: Parametrization,
        tol: f64,
    },
    /// Uniform measure on a closed orbit.
    Orbit {
        orbit: OrbitRecord,
        #[serde(default)]
        normalization: OrbitNormalization,
    },
}

impl MeasureSpec {
    pub fn volume(scheme: Scheme) -> Self {
        MeasureSpec::Volume {
            scheme,
            normalized: false,
        }
    }

    pub fn empirical(traj: &Trajectory, tol: f64) -> Self {
        let start = traj.samples.first().map_or(traj.end.into(), |s| s.point);
        MeasureSpec::Empirical {
            start,
            horizon: traj.t_end,
            parametrization: traj.parametrization,
            tol,
        }
    }

    pub fn orbit(orbit: OrbitRecord) -> Self {
        MeasureSpec::Orbit {
            orbit,
            normalization: OrbitNormalization::Period,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MeasureSpec::Volume { .. } => "volume",
            MeasureSpec::Empirical { .. } => "empirical",
            MeasureSpec::Orbit { .. } => "orbit",
        }
    }
}

/// A pairing value with its error estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub form: String,
    pub value: f64,
    pub error: f64,
}

/// Total mass of ν.
pub fn measure_mass(model: &Model, nu: &MeasureSpec) -> Result<f64> {
    match nu {
        MeasureSpec::Volume { normalized: true, .. } => Ok(1.0),
        MeasureSpec::Volume { scheme, .. } => Ok(integrate_density(model, *scheme, |_| Ok(DensitySample::exact(1.0)))?.value),
        MeasureSpec::Empirical { .. } => Ok(1.0),
        MeasureSpec::Orbit { orbit, normalization } => Ok(match normalization {
            OrbitNormalization::Period => 1.0,
            OrbitNormalization::None => orbit.period,
        }),
    }
}

/// `⟨X ⊗ ν, β⟩ = ∫ β(X) dν`.
pub fn current_pairing(model: &Model, nu: &MeasureSpec, beta: &FormField) -> Result<Pairing> {
    let (value, error) = match nu {
        MeasureSpec::Volume { scheme, normalized } => {
            let est = integrate_density(model, *scheme, |p| {
                let x = characteristic_field(model, p)?;
                let c = beta.at(p);
                let v = c.eval(&[x])?;
                let bound = (0..model.coord_dim()).map(|i| (c.components()[i] * x[i]).abs()).sum();
                Ok(DensitySample { value: v, bound })
            })?;
            if *normalized {
                let vol = integrate_density(model, *scheme, |_| Ok(DensitySample::exact(1.0)))?;
                let r = est.value / vol.value;
                (r, (est.error + r.abs() * vol.error) / vol.value.abs())
            } else {
                (est.value, est.error)
            }
        }
        MeasureSpec::Empirical {
            start,
            horizon,
            parametrization,
            tol,
        } => {
            let obs = Observable::Contraction(beta.clone());
            let rows = birkhoff_averages(model, &[obs], &Point::from(*start), &[*horizon], *parametrization, *tol)?;
            (rows[0][0], tol * (1.0 + rows[0][0].abs()))
        }
        MeasureSpec::Orbit { orbit, normalization } => {
            let integrand = |p: &Point, v: &Vector| beta.eval(p, &[*v]);
            let loop_int = orbit_integral(model, orbit, orbit.parametrization, &integrand)?;
            let v = match normalization {
                OrbitNormalization::Period => loop_int / orbit.period,
                OrbitNormalization::None => loop_int,
            };
            (v, 1e-10 * (1.0 + v.abs()) + orbit.residual)
        }
    };
    Ok(Pairing {
        form: beta.label().to_string(),
        value,
        error,
    })
}

/// Pairings of ν against closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResidual {
    pub measure: String,
    pub pairings: Vec<Pairing>,
    /// Max `|⟨X ⊗ ν, β⟩|` over all tested forms.
    pub max_abs: f64,
    pub max_error: f64,
}

/// `count` basis functions of the model, drawn without replacement.
pub fn random_basis_functions(model: &Model, cap: usize, count: usize, seed: u64) -> Vec<ScalarFunction> {
    let basis = model.function_basis(cap);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, basis.len(), count.min(basis.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| basis[i].clone()).collect()
}

/// Max pairing of ν against the H¹ basis and `random_exact` random exact
/// forms `df`; near zero for a structure boundary.
pub fn structure_boundary_residual(model: &Model, nu: &MeasureSpec, random_exact: usize, seed: u64) -> Result<BoundaryResidual> {
    let mut forms: Vec<FormField> = model.h1_basis.clone();
    for f in random_basis_functions(model, 3, random_exact, seed) {
        forms.push(FormField::exact(&f)?);
    }
    let pairings: Vec<Pairing> = forms.iter().map(|b| current_pairing(model, nu, b)).collect::<Result<_>>()?;
    Ok(BoundaryResidual {
        measure: nu.kind().into(),
        max_abs: pairings.iter().map(|p| p.value.abs()).fold(0.0, f64::max),
        max_error: pairings.iter().map(|p| p.error).fold(0.0, f64::max),
        pairings,
    })
}

/// `A(X ⊗ ν) = ⟨X ⊗ ν, α⟩`, recomputed with a shifted primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentAction {
    pub value: f64,
    pub error: f64,
    pub shifted_value: f64,
    pub shift: String,
    /// `|value − shifted_value|` within `1e-8` relative or the combined error.
    pub primitive_independent: bool,
}

pub fn current_action(model: &Model, nu: &MeasureSpec) -> Result<CurrentAction> {
    let base = current_pairing(model, nu, &model.alpha)?;
    let shifts = random_basis_functions(model, 2, 3, 17);
    let f = ScalarFunction::combination("shift", shifts.into_iter().map(|f| (0.5, f)).collect());
    let shifted = model.alpha.add(&FormField::exact(&f)?)?;
    let other = current_pairing(model, nu, &shifted)?;
    let diff = (base.value - other.value).abs();
    Ok(CurrentAction {
        value: base.value,
        error: base.error,
        shifted_value: other.value,
        shift: f.label().to_string(),
        primitive_independent: diff <= 1e-8 * base.value.abs() || diff <= 3.0 * base.error.hypot(other.error),
    })
}

/// Default volume measure of the model.
pub fn volume_measure(model: &Model) -> MeasureSpec {
    MeasureSpec::volume(default_scheme(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_t3_contact, coordinate_one_form};
    use std::f64::consts::PI;

    #[test]
    fn torus_pairings() {
        let m = build_t3_contact().unwrap();
        let nu = MeasureSpec::volume(Scheme::Grid { resolution: 16 });
        let dz = coordinate_one_form(3, 2, "dz").unwrap();
        assert_eq!(current_pairing(&m, &nu, &dz).unwrap().value, 0.0);
        let dx = coordinate_one_form(3, 0, "dx").unwrap();
        assert!(current_pairing(&m, &nu, &dx).unwrap().value.abs() < 1e-9);
        let a = current_pairing(&m, &nu, &m.alpha).unwrap().value;
        assert!((a + (2.0 * PI).powi(3)).abs() < 1e-6 * (2.0 * PI).powi(3));
    }

    #[test]
    fn torus_boundary_and_action() {
        let m = build_t3_contact().unwrap();
        let nu = MeasureSpec::volume(Scheme::Grid { resolution: 16 });
        let r = structure_boundary_residual(&m, &nu, 10, 3).unwrap();
        assert_eq!(r.pairings.len(), 13);
        assert!(r.max_abs < 1e-8, "{}", r.max_abs);
        let a = current_action(&m, &nu).unwrap();
        assert!(a.primitive_independent);
        assert!((a.value + (2.0 * PI).powi(3)).abs() < 1e-6 * (2.0 * PI).powi(3));
        assert_eq!(measure_mass(&m, &nu).unwrap().round(), (2.0 * PI).powi(3).round());
    }

    #[test]
    fn empirical_pairing_is_time_average() {
        let m = build_t3_contact().unwrap();
        let traj = crate::dynamics::integrate_characteristic(
            &m,
            &Point::new(0.1, 0.2, 0.3, 0.0),
            20.0,
            1e-10,
            Parametrization::CharacteristicField,
        )
        .unwrap();
        let nu = MeasureSpec::empirical(&traj, 1e-10);
        // α(X) = −1 along every orbit
        let a = current_pairing(&m, &nu, &m.alpha).unwrap().value;
        assert!((a + 1.0).abs() < 1e-9);
        let one = FormField::zero(3, 1).unwrap();
        assert_eq!(current_pairing(&m, &nu, &one).unwrap().value, 0.0);
    }
}
