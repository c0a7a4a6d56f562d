//! Star-shaped regular level sets `{H = c}` in `R⁴` with the restricted
//! standard symplectic form and the Liouville primitive.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Geometry, Model, ModelKind, ModelMetadata, Polynomial4};
use crate::error::{CharflowError, Result};
use crate::forms::{AxisRule, Covector, FormField, ScalarFunction};
use crate::{Point, Vector};

/// Hamiltonian of a level-set model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// `|x|²/2`.
    Sphere,
    /// `π|z₁|²/a + π|z₂|²/b`.
    Ellipsoid { a: f64, b: f64 },
    Polynomial { terms: Polynomial4 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSetSpec {
    pub hamiltonian: HamiltonianSpec,
    pub level: f64,
}

impl LevelSetSpec {
    /// Unit sphere `{|x|²/2 = 1/2}`.
    pub fn sphere() -> Self {
        Self {
            hamiltonian: HamiltonianSpec::Sphere,
            level: 0.5,
        }
    }

    /// Boundary of the ellipsoid `E(a, b)` with capacities `a, b`.
    pub fn ellipsoid(a: f64, b: f64) -> Self {
        Self {
            hamiltonian: HamiltonianSpec::Ellipsoid { a, b },
            level: 1.0,
        }
    }

    pub fn polynomial(terms: Polynomial4, level: f64) -> Self {
        Self {
            hamiltonian: HamiltonianSpec::Polynomial { terms },
            level,
        }
    }

    pub fn hamiltonian_polynomial(&self) -> Polynomial4 {
        match &self.hamiltonian {
            HamiltonianSpec::Sphere => Polynomial4::diagonal_quadratic([0.5; 4]),
            HamiltonianSpec::Ellipsoid { a, b } => {
                Polynomial4::diagonal_quadratic([PI / a, PI / a, PI / b, PI / b])
            }
            HamiltonianSpec::Polynomial { terms } => terms.clone(),
        }
    }

    pub fn name(&self) -> String {
        match &self.hamiltonian {
            HamiltonianSpec::Sphere => "sphere".into(),
            HamiltonianSpec::Ellipsoid { a, b } => format!("ellipsoid({a},{b})"),
            HamiltonianSpec::Polynomial { .. } => format!("levelset(c={})", self.level),
        }
    }
}

/// Point on the unit 3-sphere in Hopf coordinates, with the density of the
/// round volume against the unit cube.
pub(crate) fn hopf_direction(u: [f64; 3]) -> (Vector, f64) {
    let eta = 0.5 * PI * u[0];
    let (x1, x2) = (2.0 * PI * u[1], 2.0 * PI * u[2]);
    let (se, ce) = eta.sin_cos();
    let d = Vector::new(ce * x1.cos(), ce * x1.sin(), se * x2.cos(), se * x2.sin());
    (d, 2.0 * PI.powi(3) * se * ce)
}

/// Oriented orthonormal tangent frame to the hyperplane `n⊥`, built from
/// left multiplication by the quaternion units; `det[n, e₁, e₂, e₃] = 1`.
pub(crate) fn quaternion_frame(n: &Vector) -> [Vector; 3] {
    [
        Vector::new(-n[1], n[0], -n[3], n[2]),
        Vector::new(-n[2], n[3], n[0], -n[1]),
        Vector::new(-n[3], -n[2], n[1], n[0]),
    ]
}

pub(crate) struct LevelSetGeometry {
    pub(crate) poly: Polynomial4,
    pub(crate) level: f64,
}

impl LevelSetGeometry {
    /// Smallest `r > 0` with `H(r d) = c`.
    pub(crate) fn radial_root(&self, d: &Vector) -> Option<f64> {
        let f = |r: f64| self.poly.value(&(d * r)) - self.level;
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut n = 0;
        while f(hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > 60 {
                return None;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..200 {
            let v = f(r);
            if v == 0.0 {
                return Some(r);
            }
            if v < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let dv = self.poly.gradient(&(d * r)).dot(d);
            let newton = r - v / dv;
            let next = if dv > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - r).abs() <= 4.0 * f64::EPSILON * r {
                return Some(next);
            }
            r = next;
        }
        Some(r)
    }

    fn check_star_shaped(&self) -> Result<()> {
        let h0 = self.poly.value(&Point::zeros()) - self.level;
        if h0 >= 0.0 {
            return Err(CharflowError::NotStarShaped(format!(
                "origin must lie strictly inside the level (H(0) − c = {h0})"
            )));
        }
        let n = 8;
        for i in 0..n {
            for j in 0..2 * n {
                for k in 0..2 * n {
                    let u = [
                        (i as f64 + 0.5) / n as f64,
                        j as f64 / (2 * n) as f64,
                        k as f64 / (2 * n) as f64,
                    ];
                    let (d, _) = hopf_direction(u);
                    let r0 = self.radial_root(&d).ok_or_else(|| {
                        CharflowError::NotStarShaped(format!("ray {d:?} never meets the level"))
                    })?;
                    let g = self.poly.gradient(&(d * r0));
                    if g.dot(&d) <= 0.0 {
                        return Err(CharflowError::NotStarShaped(format!(
                            "level is not transverse to the ray {d:?}"
                        )));
                    }
                    let samples = 96;
                    let mut changes = 0;
                    let mut prev = h0;
                    for s in 1..=samples {
                        let r = 3.0 * r0 * s as f64 / samples as f64;
                        let v = self.poly.value(&(d * r)) - self.level;
                        if (v > 0.0) != (prev > 0.0) {
                            changes += 1;
                        }
                        prev = v;
                    }
                    if changes != 1 {
                        return Err(CharflowError::NotStarShaped(format!(
                            "ray {d:?} meets the level {changes} times"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl Geometry for LevelSetGeometry {
    fn coord_dim(&self) -> usize {
        4
    }

    fn axis_rules(&self) -> [AxisRule; 3] {
        [AxisRule::Interval { pieces: 2 }, AxisRule::Periodic, AxisRule::Periodic]
    }

    fn map_unit_cube(&self, u: [f64; 3]) -> (Point, f64) {
        let (d, w) = hopf_direction(u);
        let r = self.radial_root(&d).expect("star-shaped level checked at build");
        let p = d * r;
        let g = self.poly.gradient(&p);
        (p, w * r.powi(3) * g.norm() / g.dot(&d))
    }

    fn frame(&self, p: &Point) -> [Vector; 3] {
        quaternion_frame(&self.poly.gradient(p).normalize())
    }

    fn constraint(&self, p: &Point) -> Option<(f64, Vector)> {
        Some((self.poly.value(p) - self.level, self.poly.gradient(p)))
    }

    fn hamiltonian_speed(&self, p: &Point) -> f64 {
        self.poly.gradient(p).norm()
    }

    fn function_basis(&self, cap: usize) -> Vec<ScalarFunction> {
        monomial_basis(cap)
    }
}

/// Monomials of total degree `1..=cap` in the ambient coordinates.
pub fn monomial_basis(cap: usize) -> Vec<ScalarFunction> {
    let mut out = Vec::new();
    let c = cap as u32;
    for deg in 1..=c {
        for a in 0..=deg {
            for b in 0..=deg - a {
                for d in 0..=deg - a - b {
                    let e = [a, b, d, deg - a - b - d];
                    let p = Polynomial4::new(vec![(1.0, e)]);
                    let q = p.clone();
                    out.push(
                        ScalarFunction::new(format!("x^{e:?}"), 4, move |x| p.value(x))
                            .with_gradient(move |x| q.gradient(x)),
                    );
                }
            }
        }
    }
    out
}

fn standard_omega() -> Result<FormField> {
    FormField::new("dx₁∧dy₁ + dx₂∧dy₂", 4, 2, |_| {
        Covector::from_components(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).expect("2-form")
    })?
    .with_derivative(FormField::zero(4, 3)?)
}

fn liouville() -> Result<FormField> {
    FormField::new("½Σ(x dy − y dx)", 4, 1, |p| {
        Covector::one_form(4, &[-0.5 * p[1], 0.5 * p[0], -0.5 * p[3], 0.5 * p[2]])
    })?
    .with_derivative(standard_omega()?)
}

/// Builds the level set `{H = c}` of a star-shaped Hamiltonian, oriented by
/// the outward normal with the induced Riemannian volume.
pub fn build_levelset(spec: LevelSetSpec) -> Result<Model> {
    if !spec.level.is_finite() {
        return Err(CharflowError::InvalidArgument("level must be finite".into()));
    }
    let poly = spec.hamiltonian_polynomial();
    let geom = LevelSetGeometry {
        poly: poly.clone(),
        level: spec.level,
    };
    geom.check_star_shaped()?;
    let normal_poly = poly.clone();
    let mu = FormField::new("i_n vol₄", 4, 3, move |p| {
        let n = normal_poly.gradient(p).normalize();
        Covector::from_components(4, 3, &[-n[3], n[2], -n[1], n[0]]).expect("3-form")
    })?;
    let metadata = match spec.hamiltonian {
        HamiltonianSpec::Sphere => ModelMetadata {
            flow_description: "Hopf flow: X = (−y₁, x₁, −y₂, x₂)".into(),
            common_period: Some(2.0 * PI),
            notes: vec![],
        },
        HamiltonianSpec::Ellipsoid { a, b } => ModelMetadata {
            flow_description: format!(
                "linear flow ż_j = (2πi/a_j) z_j in Hamiltonian time; closed orbits z₂ = 0 (action {a}) and z₁ = 0 (action {b})"
            ),
            common_period: if (a - b).abs() < 1e-12 {
                Some(2.0 * (PI * a).sqrt())
            } else {
                None
            },
            notes: vec![],
        },
        HamiltonianSpec::Polynomial { .. } => ModelMetadata::default(),
    };
    Ok(Model::from_parts(
        spec.name(),
        ModelKind::LevelSet(spec),
        standard_omega()?,
        liouville()?,
        mu,
        Vec::new(),
        metadata,
        Arc::new(geom),
    ))
}

/// `∫_W ω² = 2 vol(W) = ½ ∫_{S³} r(θ)⁴ dσ` for the domain bounded by the
/// level, with `r` the radial function. Directions are sampled uniformly on
/// `S³` (Hopf coordinates with `sin² η` uniform). Returns `(value, standard error)`.
pub fn domain_omega_squared(spec: &LevelSetSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let geom = LevelSetGeometry {
        poly: spec.hamiltonian_polynomial(),
        level: spec.level,
    };
    geom.check_star_shaped()?;
    let chunk = 65_536;
    let tasks = samples.div_ceil(chunk);
    let sums: Vec<Result<(f64, f64)>> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(task as u64);
            let n = chunk.min(samples - task * chunk);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let se = rng.gen::<f64>().sqrt();
                let ce = (1.0 - se * se).sqrt();
                let (x1, x2) = (2.0 * PI * rng.gen::<f64>(), 2.0 * PI * rng.gen::<f64>());
                let d = Vector::new(ce * x1.cos(), ce * x1.sin(), se * x2.cos(), se * x2.sin());
                let r = geom
                    .radial_root(&d)
                    .ok_or_else(|| CharflowError::NotStarShaped(format!("no radial root along {:?}", d.as_slice())))?;
                let v = 0.5 * r.powi(4);
                s += v;
                s2 += v * v;
            }
            Ok((s, s2))
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for r in sums {
        let (a, b) = r?;
        s += a;
        s2 += b;
    }
    let n = samples as f64;
    let area = 2.0 * PI * PI;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    Ok((area * mean, area * (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::check_model_invariants;

    #[test]
    fn quaternion_frame_is_oriented() {
        let n = Vector::new(0.3, -0.5, 0.7, 0.1).normalize();
        let e = quaternion_frame(&n);
        let m = nalgebra::Matrix4::from_columns(&[n, e[0], e[1], e[2]]);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
        for v in &e {
            assert!(v.dot(&n).abs() < 1e-15);
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_builds_and_has_unit_radius() {
        let m = build_levelset(LevelSetSpec::sphere()).unwrap();
        let (p, _) = m.map_unit_cube([0.3, 0.2, 0.9]);
        assert!((p.norm() - 1.0).abs() < 1e-14);
        assert!(check_model_invariants(&m, 1000, 10_000, 3).unwrap().passes());
    }

    #[test]
    fn ellipsoid_builds() {
        let m = build_levelset(LevelSetSpec::ellipsoid(1.0, crate::GOLDEN_RATIO)).unwrap();
        let r = check_model_invariants(&m, 1000, 10_000, 4).unwrap();
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn origin_on_level_is_rejected() {
        let spec = LevelSetSpec::polynomial(Polynomial4::diagonal_quadratic([1.0; 4]), 0.0);
        let err = build_levelset(spec).unwrap_err();
        assert!(err.to_string().contains("radial sampler requires star-shaped level"));
    }

    #[test]
    fn non_star_shaped_is_rejected() {
        // along +x₁ the profile r² − 2r³ + 1.05r⁴ dips below the level again
        let p = Polynomial4::new(vec![
            (1.0, [2, 0, 0, 0]),
            (-2.0, [3, 0, 0, 0]),
            (1.05, [4, 0, 0, 0]),
            (1.0, [0, 2, 0, 0]),
            (1.0, [0, 0, 2, 0]),
            (1.0, [0, 0, 0, 2]),
        ]);
        let err = build_levelset(LevelSetSpec::polynomial(p, 0.053)).unwrap_err();
        assert!(matches!(err, CharflowError::NotStarShaped(_)));
    }

    #[test]
    fn monomial_basis_size() {
        assert_eq!(monomial_basis(3).len(), 34);
    }

    #[test]
    fn domain_side_volumes() {
        // 2 vol(B⁴) = π²; 2 vol(E(a, b)) = ab
        let (v, e) = domain_omega_squared(&LevelSetSpec::sphere(), 100_000, 5).unwrap();
        assert!((v - PI * PI).abs() < 1e-12 && e < 1e-12, "{v} ± {e}");
        let (v, e) = domain_omega_squared(&LevelSetSpec::ellipsoid(1.0, crate::GOLDEN_RATIO), 400_000, 5).unwrap();
        assert!((v - crate::GOLDEN_RATIO).abs() < 4.0 * e && e < 1e-3, "{v} ± {e}");
    }
}
