//! Unit tangent bundle of the Bolza surface, `Γ \ PSL(2,R)`, with the
//! twisted structures `ω_ε = −ε θ_P∧θ_W + θ_V∧θ_P` written in the
//! left-invariant coframe.
//!
//! Chart: Iwasawa coordinates `g = n(x) a(y) k(t/2)` with `t` of period 2π.
//! Lie algebra basis `V = ½diag(1,−1)`, `P = ½[[0,1],[1,0]]`,
//! `W = ½[[0,−1],[1,0]]`; `V` generates the geodesic flow.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Complex, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::bolza::{
    circumradius, disk_distance, disk_radius, from_disk, from_iwasawa, generators, inradius, reduce_with_word,
    to_disk, to_iwasawa, vertex_angle,
};
use super::{wrap_pi, Geometry, Model, ModelKind, ModelMetadata};
use crate::error::{CharflowError, Result};
use crate::forms::{AxisRule, Covector, FormField, ScalarFunction};
use crate::{Point, Vector};

pub use super::bolza::reduce_to_fundamental_domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowClass {
    /// `ε < 1`: all orbits closed with one period.
    Elliptic,
    /// `ε = 1`: horocycle flow.
    Parabolic,
    /// `ε > 1`: conjugate to a reparametrized geodesic flow.
    Hyperbolic,
}

impl FlowClass {
    pub fn of(epsilon: f64) -> Self {
        if (epsilon - 1.0).abs() < 1e-12 {
            FlowClass::Parabolic
        } else if epsilon < 1.0 {
            FlowClass::Elliptic
        } else {
            FlowClass::Hyperbolic
        }
    }
}

fn algebra_coords(m: &Matrix2<f64>) -> [f64; 3] {
    [m[(0, 0)] - m[(1, 1)], m[(0, 1)] + m[(1, 0)], m[(1, 0)] - m[(0, 1)]]
}

/// `C[a][i] = θ_a(∂_i)` for `a ∈ (V, P, W)` and `i ∈ (x, y, t)`.
pub(crate) fn coframe(p: &Point) -> Matrix3<f64> {
    let (y, t) = (p[1], p[2]);
    let (s, c) = (0.5 * t).sin_cos();
    let k = Matrix2::new(c, -s, s, c);
    let k_inv = Matrix2::new(c, s, -s, c);
    let xi_x = k_inv * Matrix2::new(0.0, 1.0 / y, 0.0, 0.0) * k;
    let xi_y = k_inv * Matrix2::new(0.5 / y, 0.0, 0.0, -0.5 / y) * k;
    let cx = algebra_coords(&xi_x);
    let cy = algebra_coords(&xi_y);
    Matrix3::new(cx[0], cy[0], 0.0, cx[1], cy[1], 0.0, cx[2], cy[2], 1.0)
}

fn coframe_forms(p: &Point) -> [Covector; 3] {
    let c = coframe(p);
    std::array::from_fn(|a| Covector::one_form(3, &[c[(a, 0)], c[(a, 1)], c[(a, 2)]]))
}

/// Left-invariant frame `(V, P, W)` in chart coordinates.
pub(crate) fn invariant_frame(p: &Point) -> [Vector; 3] {
    let inv = coframe(p).try_inverse().expect("coframe is invertible for y > 0");
    std::array::from_fn(|a| Vector::new(inv[(0, a)], inv[(1, a)], inv[(2, a)], 0.0))
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn reduced_disk_point(p: &Point) -> Complex<f64> {
    let g = from_iwasawa(p[0], p[1], p[2]);
    let h = reduce_with_word(&g).map(|(h, _)| h).unwrap_or(g);
    let (x, y, _) = to_iwasawa(&h);
    to_disk(Complex::new(x, y))
}

/// Distance from the base point to the octagon centre, on the quotient.
pub fn distance_to_centre(p: &Point) -> f64 {
    disk_radius(reduced_disk_point(p))
}

/// Distance from the base point to the (single) vertex class.
pub fn distance_to_vertex(p: &Point) -> f64 {
    let w = reduced_disk_point(p);
    let r = (0.5 * circumradius()).tanh();
    (0..8)
        .map(|k| disk_distance(w, Complex::from_polar(r, vertex_angle(k))))
        .fold(f64::INFINITY, f64::min)
}

/// Γ-invariant bumps in the distance to the centre and to the vertex.
pub fn bolza_bumps(cap: usize) -> Vec<ScalarFunction> {
    let mut out = Vec::new();
    let dm = inradius();
    for j in 1..=cap.max(1) {
        let f = j as f64 / cap.max(1) as f64;
        let rc = 0.98 * dm * (0.4 + 0.6 * f);
        out.push(ScalarFunction::new(format!("bump_centre({rc:.3})"), 3, move |p| {
            bump(distance_to_centre(p) / rc)
        }));
        let rv = 0.9 * (0.4 + 0.6 * f);
        out.push(ScalarFunction::new(format!("bump_vertex({rv:.3})"), 3, move |p| {
            bump(distance_to_vertex(p) / rv)
        }));
    }
    out
}

struct BolzaGeometry;

impl BolzaGeometry {
    fn edge_radius(phi: f64) -> f64 {
        let k = (phi / (PI / 4.0)).round();
        let delta = phi - k * PI / 4.0;
        (inradius().tanh() / delta.cos()).atanh()
    }
}

impl Geometry for BolzaGeometry {
    fn coord_dim(&self) -> usize {
        3
    }

    fn axis_rules(&self) -> [AxisRule; 3] {
        [
            AxisRule::Interval { pieces: 16 },
            AxisRule::Interval { pieces: 2 },
            AxisRule::Periodic,
        ]
    }

    fn map_unit_cube(&self, u: [f64; 3]) -> (Point, f64) {
        let phi = 2.0 * PI * u[0];
        let re = Self::edge_radius(phi);
        let r = u[1] * re;
        let z = from_disk(Complex::from_polar((0.5 * r).tanh(), phi));
        let t = 2.0 * PI * u[2];
        (Point::new(z.re, z.im, t, 0.0), 4.0 * PI * PI * re * r.sinh())
    }

    fn frame(&self, p: &Point) -> [Vector; 3] {
        invariant_frame(p)
    }

    fn reduce(&self, p: &Point) -> Result<(Point, Option<Matrix2<f64>>)> {
        let g = from_iwasawa(p[0], p[1], p[2]);
        let (h, gamma) = reduce_with_word(&g)?;
        let (x, y, t) = to_iwasawa(&h);
        Ok((Point::new(x, y, t, 0.0), Some(gamma)))
    }

    fn displacement(&self, a: &Point, b: &Point) -> Vector {
        let d = b - a;
        Vector::new(d[0], d[1], wrap_pi(d[2]), 0.0)
    }

    fn periodic_axes(&self) -> &[usize] {
        &[2]
    }

    fn deck_images(&self, p: &Point) -> Vec<(Point, Matrix2<f64>)> {
        let g = from_iwasawa(p[0], p[1], p[2]);
        generators()
            .iter()
            .map(|t| {
                let (x, y, s) = to_iwasawa(&(t * g));
                (Point::new(x, y, s, 0.0), *t)
            })
            .collect()
    }

    fn function_basis(&self, cap: usize) -> Vec<ScalarFunction> {
        bolza_bumps(cap)
    }
}

/// `T¹Σ₂` with `α = ε θ_V + θ_W`, `ω = dα`, `μ = θ_V∧θ_P∧θ_W`; the
/// characteristic field is `−εV + W`.
pub fn build_hyperbolic_utb(epsilon: f64) -> Result<Model> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(CharflowError::NonPositiveEpsilon(epsilon));
    }
    let e = epsilon;
    let omega = FormField::new("−ε θP∧θW + θV∧θP", 3, 2, move |p| {
        let [v, q, w] = coframe_forms(p);
        let a = q.wedge(&w).expect("1∧1");
        let b = v.wedge(&q).expect("1∧1");
        b.add(&a.scale(-e)).expect("same degree")
    })?
    .with_derivative(FormField::zero(3, 3)?)?;
    let alpha = FormField::new("ε θV + θW", 3, 1, move |p| {
        let [v, _, w] = coframe_forms(p);
        w.add(&v.scale(e)).expect("same degree")
    })?
    .with_derivative(omega.clone())?;
    let mu = FormField::new("θV∧θP∧θW", 3, 3, |p| {
        let [v, q, w] = coframe_forms(p);
        v.wedge(&q).and_then(|vq| vq.wedge(&w)).expect("1∧1∧1")
    })?;
    let class = FlowClass::of(epsilon);
    let metadata = ModelMetadata {
        flow_description: match class {
            FlowClass::Elliptic => "every orbit closed, common period 2π/√(1−ε²)".into(),
            FlowClass::Parabolic => "horocycle flow".into(),
            FlowClass::Hyperbolic => "conjugate to a reparametrized geodesic flow".into(),
        },
        common_period: (class == FlowClass::Elliptic).then(|| 2.0 * PI / (1.0 - e * e).sqrt()),
        notes: vec![
            "α(X) = 1 − ε² is constant".into(),
            "closed 1-forms are not constructed; H¹ basis left empty".into(),
        ],
    };
    Ok(Model::from_parts(
        format!("hyperbolic_utb(ε={epsilon})"),
        ModelKind::HyperbolicUtb {
            epsilon,
            flow_class: class,
        },
        omega,
        alpha,
        mu,
        Vec::new(),
        metadata,
        Arc::new(BolzaGeometry),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::bolza::{self, side_angle};
    use crate::models::check_model_invariants;

    #[test]
    fn coframe_matches_group_derivatives() {
        let p = Point::new(0.3, 0.7, 1.1, 0.0);
        let g = from_iwasawa(p[0], p[1], p[2]);
        let g_inv = g.try_inverse().unwrap();
        let c = coframe(&p);
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let dg = (from_iwasawa(a[0], a[1], a[2]) - from_iwasawa(b[0], b[1], b[2])) / 2e-6;
            let xi = algebra_coords(&(g_inv * dg));
            for k in 0..3 {
                assert!((xi[k] - c[(k, i)]).abs() < 1e-8, "{i} {k}");
            }
        }
    }

    #[test]
    fn invariants_hold_for_each_class() {
        for e in [0.5, 1.0, 1.5] {
            let m = build_hyperbolic_utb(e).unwrap();
            let r = check_model_invariants(&m, 1000, 10_000, 7).unwrap();
            assert!(r.passes(), "{e}: {r:?}");
        }
    }

    #[test]
    fn unit_cube_covers_octagon() {
        let m = build_hyperbolic_utb(1.0).unwrap();
        for u in [[0.01, 0.99, 0.3], [0.5, 0.5, 0.5], [0.0625, 0.999, 0.0]] {
            let (p, w) = m.map_unit_cube(u);
            assert!(w > 0.0);
            let wd = to_disk(Complex::new(p[0], p[1]));
            assert!(bolza::octagon_contains(wd, 1e-9));
        }
        let (p, _) = m.map_unit_cube([0.0, 1.0, 0.0]);
        let r = disk_radius(to_disk(Complex::new(p[0], p[1])));
        assert!((r - inradius()).abs() < 1e-9);
        assert!((side_angle(0)).abs() < 1e-15);
    }

    #[test]
    fn bumps_are_invariant() {
        let f = &bolza_bumps(2)[1];
        let p = Point::new(0.1, 0.5, 0.4, 0.0);
        let g = from_iwasawa(p[0], p[1], p[2]);
        let (x, y, t) = to_iwasawa(&(bolza::generators()[3] * g));
        let q = Point::new(x, y, t, 0.0);
        assert!((f.value(&p) - f.value(&q)).abs() < 1e-12);
    }
}
