//! The characteristic field `X` defined by `i_X μ = ω`.

use serde::{Deserialize, Serialize};

use crate::error::{CharflowError, Result};
use crate::models::Model;
use crate::{Point, Vector};

/// Time parametrization of the characteristic foliation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// The field `X` with `i_X μ = ω`.
    #[default]
    CharacteristicField,
    /// The positive reparametrization of `X` moving at Hamiltonian speed.
    HamiltonianField,
}

/// Solves `i_X μ = ω` at `p` against the model's oriented frame.
///
/// Writing `X = Σ c_k e_k`, the equations on frame pairs are diagonal:
/// `c₁ μ₁₂₃ = ω(e₂, e₃)` and cyclically.
pub fn characteristic_field(model: &Model, p: &Point) -> Result<Vector> {
    let e = model.frame(p);
    let m = model.mu_density(p, &e);
    let w = model.omega.at(p);
    let rhs = [
        w.eval(&[e[1], e[2]])?,
        w.eval(&[e[2], e[0]])?,
        w.eval(&[e[0], e[1]])?,
    ];
    if !(m.abs() > 1e-300) || !m.is_finite() {
        return Err(CharflowError::SingularField(p.iter().copied().collect()));
    }
    let x = (e[0] * rhs[0] + e[1] * rhs[1] + e[2] * rhs[2]) / m;
    if x.norm() == 0.0 || !x.iter().all(|v| v.is_finite()) {
        return Err(CharflowError::SingularField(p.iter().copied().collect()));
    }
    Ok(x)
}

/// Speed factor `λ(p) > 0` with `V = λ X` for the given parametrization.
pub fn speed_factor(model: &Model, p: &Point, param: Parametrization) -> f64 {
    match param {
        Parametrization::CharacteristicField => 1.0,
        Parametrization::HamiltonianField => model.hamiltonian_speed(p),
    }
}

/// Flow generator for the chosen parametrization.
pub fn flow_vector(model: &Model, p: &Point, param: Parametrization) -> Result<Vector> {
    Ok(characteristic_field(model, p)? * speed_factor(model, p, param))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::ScalarFunction;
    use crate::models::{build_hyperbolic_utb, build_levelset, build_magnetic_torus, build_t3_contact, LevelSetSpec, MagneticSpec};

    #[test]
    fn torus_field() {
        let m = build_t3_contact().unwrap();
        for z in [0.0, 0.7, 2.5] {
            let x = characteristic_field(&m, &Point::new(1.0, 2.0, z, 0.0)).unwrap();
            assert!((x - Vector::new(-z.cos(), -z.sin(), 0.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn scaling_volume_scales_field() {
        let m = build_t3_contact().unwrap();
        let c: f64 = 3.5;
        let scaled = m.with_scaled_volume(ScalarFunction::new("log c", 3, move |_| c.ln()));
        let p = Point::new(0.3, 0.1, 0.9, 0.0);
        let a = characteristic_field(&m, &p).unwrap();
        let b = characteristic_field(&scaled, &p).unwrap();
        assert!((a / c - b).norm() < 1e-14);
    }

    #[test]
    fn sphere_field_is_rotation() {
        let m = build_levelset(LevelSetSpec::sphere()).unwrap();
        let p = Point::new(0.5, -0.5, 0.5, 0.5);
        let x = characteristic_field(&m, &p).unwrap();
        let rot = Vector::new(-p[1], p[0], -p[3], p[2]);
        assert!((x - rot).norm() < 1e-14, "{x}");
    }

    #[test]
    fn lorentz_system() {
        let m = build_magnetic_torus(MagneticSpec::sin_x(0.05)).unwrap();
        let p = Point::new(0.4, 1.0, 2.0, 0.0);
        let x = characteristic_field(&m, &p).unwrap();
        let want = Vector::new(-0.05 * 2f64.cos(), -0.05 * 2f64.sin(), 0.4f64.cos(), 0.0);
        assert!((x - want).norm() < 1e-14);
    }

    #[test]
    fn hyperbolic_field_in_invariant_frame() {
        let e = 0.5;
        let m = build_hyperbolic_utb(e).unwrap();
        let p = Point::new(0.2, 0.9, 1.0, 0.0);
        let f = m.frame(&p);
        let x = characteristic_field(&m, &p).unwrap();
        assert!((x - (f[2] - f[0] * e)).norm() < 1e-12);
        let ax = m.alpha.eval(&p, &[x]).unwrap();
        assert!((ax - (1.0 - e * e)).abs() < 1e-12);
    }
}
