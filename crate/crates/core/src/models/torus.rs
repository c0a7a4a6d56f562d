//! The contact form `cos z dx + sin z dy` on the 3-torus.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{coordinate_one_form, standard_frame, trig_basis, wrap_pi, Geometry, Model, ModelKind, ModelMetadata};
use crate::error::Result;
use crate::forms::{AxisRule, Covector, FormField, ScalarFunction};
use crate::{Point, Vector};

const TAU: f64 = 2.0 * PI;

struct PeriodicBox;

impl Geometry for PeriodicBox {
    fn coord_dim(&self) -> usize {
        3
    }

    fn axis_rules(&self) -> [AxisRule; 3] {
        [AxisRule::Periodic; 3]
    }

    fn map_unit_cube(&self, u: [f64; 3]) -> (Point, f64) {
        (Point::new(TAU * u[0], TAU * u[1], TAU * u[2], 0.0), TAU.powi(3))
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

pub(crate) fn periodic_displacement(a: &Point, b: &Point) -> Vector {
    let d = b - a;
    Vector::new(wrap_pi(d[0]), wrap_pi(d[1]), wrap_pi(d[2]), 0.0)
}

pub(crate) fn box_volume_form() -> Result<FormField> {
    FormField::new("dx∧dy∧dz", 3, 3, |_| Covector::from_components(3, 3, &[1.0]).expect("3-form"))
}

/// T³ with `α = cos z dx + sin z dy`, `ω = dα` and `μ = dx∧dy∧dz`.
pub fn build_t3_contact() -> Result<Model> {
    let omega = FormField::new("sin z dx∧dz − cos z dy∧dz", 3, 2, |p| {
        Covector::from_components(3, 2, &[0.0, p[2].sin(), -p[2].cos()]).expect("2-form")
    })?
    .with_derivative(FormField::zero(3, 3)?)?;
    let alpha = FormField::new("cos z dx + sin z dy", 3, 1, |p| {
        Covector::one_form(3, &[p[2].cos(), p[2].sin(), 0.0])
    })?
    .with_derivative(omega.clone())?;
    let h1 = vec![
        coordinate_one_form(3, 0, "dx")?,
        coordinate_one_form(3, 1, "dy")?,
        coordinate_one_form(3, 2, "dz")?,
    ];
    Ok(Model::from_parts(
        "t3_contact",
        ModelKind::T3Contact,
        omega,
        alpha,
        box_volume_form()?,
        h1,
        ModelMetadata {
            flow_description: "linear flow X = −(cos z, sin z, 0) on invariant 2-tori z = const".into(),
            common_period: None,
            notes: vec![],
        },
        Arc::new(PeriodicBox),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::wedge_eval;
    use crate::models::check_model_invariants;

    #[test]
    fn alpha_wedge_omega_is_minus_volume() {
        let m = build_t3_contact().unwrap();
        for z in [0.0, 0.4, 1.9, 4.0] {
            let p = Point::new(0.2, 0.7, z, 0.0);
            let v = wedge_eval(&m.alpha, &m.omega, &p, &standard_frame()).unwrap();
            assert!((v + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn invariants_hold() {
        let m = build_t3_contact().unwrap();
        let r = check_model_invariants(&m, 1000, 10_000, 1).unwrap();
        assert!(r.passes(), "{r:?}");
        assert!(r.min_comass > 0.99);
    }

    #[test]
    fn displacement_wraps() {
        let a = Point::new(0.1, 0.0, 6.2, 0.0);
        let b = Point::new(6.2, 0.0, 0.1, 0.0);
        let d = periodic_displacement(&a, &b);
        assert!((d[0] + (TAU - 6.1)).abs() < 1e-12);
        assert!((d[2] - (TAU - 6.1)).abs() < 1e-12);
    }
}
