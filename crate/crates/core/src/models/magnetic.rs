//! Energy levels of twisted geodesic flows on the flat 2-torus.
//!
//! On `T*T²` with `ω = dp∧dq + π*σ`, `σ = d(f dy)`, the level `|p| = ε` is
//! parametrized by `(x, y, θ)` with `p = ε(cos θ, sin θ)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::torus::{box_volume_form, periodic_displacement};
use super::{coordinate_one_form, standard_frame, trig_basis, Geometry, Model, ModelKind, ModelMetadata};
use crate::error::{CharflowError, Result};
use crate::forms::{AxisRule, Covector, FormField, ScalarFunction};
use crate::{Point, Vector};

/// `c·cos(kx x + ky y) + s·sin(kx x + ky y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub kx: i32,
    pub ky: i32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticSpec {
    /// Terms of the potential `f` with `σ = d(f dy)`.
    pub potential: Vec<TrigTerm>,
    pub epsilon: f64,
}

impl MagneticSpec {
    /// `f = sin x`, so the field strength is `B = cos x`.
    pub fn sin_x(epsilon: f64) -> Self {
        Self {
            potential: vec![TrigTerm {
                kx: 1,
                ky: 0,
                cos: 0.0,
                sin: 1.0,
            }],
            epsilon,
        }
    }

    /// Zero magnetic field: the geodesic flow of the flat torus.
    pub fn flat(epsilon: f64) -> Self {
        Self {
            potential: Vec::new(),
            epsilon,
        }
    }

    /// `(f, ∂f/∂x, ∂f/∂y)` at `(x, y)`.
    pub fn potential_jet(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for t in &self.potential {
            let ph = t.kx as f64 * x + t.ky as f64 * y;
            let (s, c) = ph.sin_cos();
            let dph = -t.cos * s + t.sin * c;
            out.0 += t.cos * c + t.sin * s;
            out.1 += t.kx as f64 * dph;
            out.2 += t.ky as f64 * dph;
        }
        out
    }

    /// Field strength `B = ∂f/∂x`, the density of `σ` against `dx∧dy`.
    pub fn field_strength(&self, x: f64, y: f64) -> f64 {
        self.potential_jet(x, y).1
    }

    /// `∫_{T²} σ` by the periodic trapezoid rule.
    pub fn total_flux(&self) -> f64 {
        let n = 64;
        let h = 2.0 * PI / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.field_strength(i as f64 * h, j as f64 * h);
            }
        }
        s * h * h
    }
}

struct MagneticGeometry;

impl Geometry for MagneticGeometry {
    fn coord_dim(&self) -> usize {
        3
    }

    fn axis_rules(&self) -> [AxisRule; 3] {
        [AxisRule::Periodic; 3]
    }

    fn map_unit_cube(&self, u: [f64; 3]) -> (Point, f64) {
        let t = 2.0 * PI;
        (Point::new(t * u[0], t * u[1], t * u[2], 0.0), t.powi(3))
    }

    fn frame(&self, _p: &Point) -> [Vector; 3] {
        standard_frame()
    }

    fn displacement(&self, a: &Point, b: &Point) -> Vector {
        periodic_displacement(a, b)
    }

    fn periodic_axes(&self) -> &[usize] {
        &[0, 1, 2]
    }

    fn function_basis(&self, cap: usize) -> Vec<ScalarFunction> {
        trig_basis(3, cap)
    }
}

/// Builds the energy level `M_ε` of the twisted geodesic flow.
pub fn build_magnetic_torus(spec: MagneticSpec) -> Result<Model> {
    let eps = spec.epsilon;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CharflowError::NonPositiveEpsilon(eps));
    }
    if spec.potential.iter().any(|t| !t.cos.is_finite() || !t.sin.is_finite()) {
        return Err(CharflowError::InvalidArgument("potential coefficients must be finite".into()));
    }
    let flux = spec.total_flux();
    if flux.abs() > 1e-9 {
        return Err(CharflowError::InvalidArgument(format!("σ must be exact, flux {flux}")));
    }
    let s1 = spec.clone();
    let omega = FormField::new("ε sinθ dx∧dθ − ε cosθ dy∧dθ + B dx∧dy", 3, 2, move |p| {
        let b = s1.field_strength(p[0], p[1]);
        Covector::from_components(3, 2, &[b, eps * p[2].sin(), -eps * p[2].cos()]).expect("2-form")
    })?
    .with_derivative(FormField::zero(3, 3)?)?;
    let s2 = spec.clone();
    let alpha = FormField::new("ε cosθ dx + (ε sinθ + f) dy", 3, 1, move |p| {
        let (f, _, _) = s2.potential_jet(p[0], p[1]);
        Covector::one_form(3, &[eps * p[2].cos(), eps * p[2].sin() + f, 0.0])
    })?
    .with_derivative(omega.clone())?;
    let h1 = vec![
        coordinate_one_form(3, 0, "dx")?,
        coordinate_one_form(3, 1, "dy")?,
        coordinate_one_form(3, 2, "dθ")?,
    ];
    let flat = spec.potential.iter().all(|t| t.cos == 0.0 && t.sin == 0.0 || t.kx == 0);
    let metadata = ModelMetadata {
        flow_description: if flat {
            "geodesic flow of the flat torus (σ = 0)".into()
        } else {
            "Lorentz system ẋ = −ε cosθ, ẏ = −ε sinθ, θ̇ = B(x, y)".into()
        },
        common_period: None,
        notes: vec![format!("energy ε²/2 with ε = {eps}")],
    };
    Ok(Model::from_parts(
        format!("magnetic_torus(ε={eps})"),
        ModelKind::MagneticTorus(spec),
        omega,
        alpha,
        box_volume_form()?,
        h1,
        metadata,
        Arc::new(MagneticGeometry),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::check_model_invariants;

    #[test]
    fn rejects_nonpositive_energy() {
        let e = build_magnetic_torus(MagneticSpec::sin_x(-1.0)).unwrap_err();
        assert!(e.to_string().contains("epsilon must be positive"));
        assert!(build_magnetic_torus(MagneticSpec::sin_x(0.0)).is_err());
    }

    #[test]
    fn sin_potential_is_exact_and_invariants_hold() {
        let spec = MagneticSpec::sin_x(0.05);
        assert!(spec.total_flux().abs() < 1e-12);
        let m = build_magnetic_torus(spec).unwrap();
        let r = check_model_invariants(&m, 1000, 10_000, 2).unwrap();
        assert!(r.passes(), "{r:?}");
        assert!(r.exactness_residual < 1e-8);
    }

    #[test]
    fn field_strength_of_sin_x() {
        let s = MagneticSpec::sin_x(1.0);
        assert!((s.field_strength(0.7, 2.0) - 0.7f64.cos()).abs() < 1e-15);
    }
}
