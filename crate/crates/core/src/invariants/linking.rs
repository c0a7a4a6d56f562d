//! The self-linking number `Lk(ω) = ∫ α ∧ ω`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forms::{integrate_top_form, IntegralEstimate, Scheme};
use crate::models::{domain_omega_squared, Model, ModelKind};

/// `∫_W ω²` over the domain bounded by a level set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSide {
    pub value: f64,
    pub error: f64,
    pub samples: usize,
    /// `|surface − domain|` below three combined errors.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    pub value: f64,
    pub error: f64,
    pub scheme: Scheme,
    pub nodes: usize,
    pub primitive: String,
    #[serde(default)]
    pub domain: Option<DomainSide>,
}

impl LinkResult {
    /// Whether `other` agrees with this value within three combined errors.
    pub fn agrees_with(&self, other: &LinkResult) -> bool {
        (self.value - other.value).abs() <= 3.0 * self.error.hypot(other.error)
    }
}

/// Scheme used when none is configured: 10⁶ Monte Carlo samples on level
/// sets, tensor grids elsewhere.
pub fn default_lk_scheme(model: &Model, seed: u64) -> Scheme {
    match model.kind {
        ModelKind::LevelSet(_) => Scheme::MonteCarlo {
            samples: 1_000_000,
            seed,
        },
        ModelKind::HyperbolicUtb { .. } => Scheme::Grid { resolution: 24 },
        _ => Scheme::Grid { resolution: 64 },
    }
}

fn surface(model: &Model, scheme: Scheme) -> Result<IntegralEstimate> {
    let density = model.alpha.wedge(&model.omega)?;
    integrate_top_form(model, &density, scheme)
}

/// `∫_M α ∧ ω`; for level sets also `∫_W ω²` by hit-or-miss sampling of
/// the enclosed domain.
pub fn linking_number(model: &Model, scheme: Scheme) -> Result<LinkResult> {
    let est = surface(model, scheme)?;
    let domain = match (&model.kind, scheme) {
        (ModelKind::LevelSet(spec), _) => {
            let (samples, seed) = match scheme {
                Scheme::MonteCarlo { samples, seed } => (samples, seed ^ 0xd0),
                Scheme::Grid { resolution } => (resolution.pow(3).max(1 << 16), 0xd0),
            };
            let (value, error) = domain_omega_squared(spec, samples, seed)?;
            Some(DomainSide {
                value,
                error,
                samples,
                consistent: (value - est.value).abs() <= 3.0 * error.hypot(est.error),
            })
        }
        _ => None,
    };
    Ok(LinkResult {
        value: est.value,
        error: est.error,
        scheme,
        nodes: est.nodes,
        primitive: model.alpha.label().to_string(),
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::ScalarFunction;
    use crate::models::build_t3_contact;
    use std::f64::consts::PI;

    #[test]
    fn torus_linking_number() {
        let m = build_t3_contact().unwrap();
        let lk = linking_number(&m, Scheme::Grid { resolution: 16 }).unwrap();
        assert!((lk.value + (2.0 * PI).powi(3)).abs() < 1e-9);
        assert!(lk.domain.is_none());
        let f = ScalarFunction::new("sin x sin y sin z", 3, |p| p[0].sin() * p[1].sin() * p[2].sin());
        let shifted = linking_number(&m.with_shifted_primitive(&f).unwrap(), Scheme::Grid { resolution: 16 }).unwrap();
        assert!(lk.agrees_with(&shifted));
        assert!((lk.value - shifted.value).abs() < 1e-6 * lk.value.abs());
    }
}
