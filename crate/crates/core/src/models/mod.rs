//! Catalog of concrete Hamiltonian structures.
//!
//! Each model is a closed oriented 3-manifold in one global chart (a periodic
//! box, a hypersurface of `R⁴`, or Iwasawa coordinates on `PSL(2,R)`)
//! carrying `ω`, a primitive `α`, a volume form `μ` and closed 1-forms
//! spanning `H¹` (when they are available in closed form).

mod basis;
pub mod bolza;
mod hyperbolic;
mod levelset;
mod magnetic;
mod polynomial;
mod torus;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CharflowError, Result};
use crate::forms::{
    fd_exterior_derivative_extrapolated, AxisRule, Covector, FormField, ScalarFunction, Scheme,
    FD_STEP,
};
use crate::{Point, Vector};

pub use basis::trig_basis;
pub use hyperbolic::{build_hyperbolic_utb, reduce_to_fundamental_domain, FlowClass};
pub use levelset::{build_levelset, domain_omega_squared, monomial_basis, HamiltonianSpec, LevelSetSpec};
pub use magnetic::{build_magnetic_torus, MagneticSpec, TrigTerm};
pub use polynomial::Polynomial4;
pub use torus::build_t3_contact;

/// Serializable description of how a model was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    T3Contact,
    LevelSet(LevelSetSpec),
    MagneticTorus(MagneticSpec),
    HyperbolicUtb { epsilon: f64, flow_class: FlowClass },
}

/// Chart-level geometry behind a model.
pub(crate) trait Geometry: Send + Sync {
    fn coord_dim(&self) -> usize;

    fn axis_rules(&self) -> [AxisRule; 3];

    /// Maps the unit cube onto the manifold; the second value is the density
    /// of μ against Lebesgue measure on the cube.
    fn map_unit_cube(&self, u: [f64; 3]) -> (Point, f64);

    /// Positively oriented tangent frame at `p`.
    fn frame(&self, p: &Point) -> [Vector; 3];

    /// `(H(p) − c, ∇H(p))` for hypersurface charts.
    fn constraint(&self, _p: &Point) -> Option<(f64, Vector)> {
        None
    }

    /// Reduces `p` into the chart's fundamental region. Returns the deck
    /// element applied when the model is a group quotient.
    fn reduce(&self, p: &Point) -> Result<(Point, Option<Matrix2<f64>>)> {
        Ok((*p, None))
    }

    /// Chart displacement from `a` to `b`, wrapping periodic axes.
    fn displacement(&self, a: &Point, b: &Point) -> Vector {
        b - a
    }

    fn periodic_axes(&self) -> &[usize] {
        &[]
    }

    /// Images of `p` under the deck generators, for quotient charts.
    fn deck_images(&self, _p: &Point) -> Vec<(Point, Matrix2<f64>)> {
        Vec::new()
    }

    /// Positive factor turning the characteristic field into the
    /// Hamiltonian-speed parametrization.
    fn hamiltonian_speed(&self, _p: &Point) -> f64 {
        1.0
    }

    fn function_basis(&self, cap: usize) -> Vec<ScalarFunction>;

    fn supported_schemes(&self) -> &[&'static str] {
        &["grid", "monte_carlo"]
    }
}

/// Top-degree form with its orientation flag.
#[derive(Clone, Debug)]
pub struct VolumeForm {
    pub form: FormField,
    /// Set when the form is positive on the model's oriented frame.
    pub positive: bool,
}

/// Metadata describing analytic facts known about a model's flow.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub flow_description: String,
    /// Closed-form common period in the characteristic parametrization.
    pub common_period: Option<f64>,
    pub notes: Vec<String>,
}

/// A Hamiltonian structure on a closed 3-manifold with its primitive.
#[derive(Clone)]
pub struct Model {
    pub name: String,
    pub kind: ModelKind,
    pub omega: FormField,
    pub alpha: FormField,
    pub mu: VolumeForm,
    pub h1_basis: Vec<FormField>,
    pub metadata: ModelMetadata,
    geometry: Arc<dyn Geometry>,
    volume_scale: Option<ScalarFunction>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl Model {
    pub(crate) fn from_parts(
        name: impl Into<String>,
        kind: ModelKind,
        omega: FormField,
        alpha: FormField,
        mu: FormField,
        h1_basis: Vec<FormField>,
        metadata: ModelMetadata,
        geometry: Arc<dyn Geometry>,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            omega,
            alpha,
            mu: VolumeForm {
                form: mu,
                positive: true,
            },
            h1_basis,
            metadata,
            geometry,
            volume_scale: None,
        }
    }

    pub fn coord_dim(&self) -> usize {
        self.geometry.coord_dim()
    }

    pub fn axis_rules(&self) -> [AxisRule; 3] {
        self.geometry.axis_rules()
    }

    /// Unit-cube parametrization with μ-density (including any volume rescale).
    pub fn map_unit_cube(&self, u: [f64; 3]) -> (Point, f64) {
        let (p, w) = self.geometry.map_unit_cube(u);
        (p, w * self.volume_factor(&p))
    }

    pub fn frame(&self, p: &Point) -> [Vector; 3] {
        self.geometry.frame(p)
    }

    fn volume_factor(&self, p: &Point) -> f64 {
        self.volume_scale.as_ref().map_or(1.0, |g| g.value(p).exp())
    }

    /// `μ(e_1, e_2, e_3)` on the given frame.
    pub fn mu_density(&self, p: &Point, frame: &[Vector; 3]) -> f64 {
        self.mu.form.eval(p, frame).expect("volume is a 3-form") * self.volume_factor(p)
    }

    pub fn constraint(&self, p: &Point) -> Option<(f64, Vector)> {
        self.geometry.constraint(p)
    }

    /// Distance from the constraint set (zero for intrinsic charts).
    pub fn drift(&self, p: &Point) -> f64 {
        self.constraint(p).map_or(0.0, |(v, _)| v.abs())
    }

    /// Orthogonal projection back onto the constraint set.
    pub fn project(&self, p: &Point) -> Point {
        let mut q = *p;
        for _ in 0..8 {
            match self.constraint(&q) {
                Some((v, g)) => {
                    let n2 = g.norm_squared();
                    if n2 == 0.0 || v.abs() < 1e-15 {
                        break;
                    }
                    q -= g * (v / n2);
                }
                None => break,
            }
        }
        q
    }

    pub fn reduce(&self, p: &Point) -> Result<(Point, Option<Matrix2<f64>>)> {
        self.geometry.reduce(p)
    }

    pub fn displacement(&self, a: &Point, b: &Point) -> Vector {
        self.geometry.displacement(a, b)
    }

    pub fn periodic_axes(&self) -> &[usize] {
        self.geometry.periodic_axes()
    }

    pub fn deck_images(&self, p: &Point) -> Vec<(Point, Matrix2<f64>)> {
        self.geometry.deck_images(p)
    }

    pub fn hamiltonian_speed(&self, p: &Point) -> f64 {
        self.geometry.hamiltonian_speed(p)
    }

    /// Smooth functions whose differentials span the exact-form search space.
    pub fn function_basis(&self, cap: usize) -> Vec<ScalarFunction> {
        self.geometry.function_basis(cap)
    }

    pub(crate) fn check_scheme(&self, scheme: Scheme) -> Result<()> {
        let supported = self.geometry.supported_schemes();
        if supported.contains(&scheme.name()) {
            Ok(())
        } else {
            Err(CharflowError::UnsupportedScheme {
                requested: scheme.name().into(),
                model: self.name.clone(),
                supported: supported.join(", "),
            })
        }
    }

    /// Copy of the model with `μ` replaced by `e^g μ`.
    pub fn with_scaled_volume(&self, g: ScalarFunction) -> Model {
        let mut m = self.clone();
        let combined = match &self.volume_scale {
            Some(old) => {
                let (a, b) = (old.clone(), g);
                ScalarFunction::new(format!("{} + {}", a.label(), b.label()), a.dim(), move |p| {
                    a.value(p) + b.value(p)
                })
            }
            None => g,
        };
        m.name = format!("{}·e^{}", self.name, combined.label());
        m.volume_scale = Some(combined);
        m
    }

    /// Copy of the model with the primitive replaced by `α + df`.
    pub fn with_shifted_primitive(&self, f: &ScalarFunction) -> Result<Model> {
        let mut m = self.clone();
        m.alpha = self.alpha.add(&FormField::exact(f)?)?;
        Ok(m)
    }

    /// Point sampled uniformly on the unit cube, mapped to the manifold.
    pub fn sample_point(&self, rng: &mut impl Rng) -> Point {
        let u = [rng.gen(), rng.gen(), rng.gen()];
        self.map_unit_cube(u).0
    }

    pub fn sample_points(&self, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_point(&mut rng)).collect()
    }
}

/// Results of checking the structural invariants of a model on samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// `max |dα − ω|` over samples, relative to `1 + |ω|`.
    pub exactness_residual: f64,
    /// `min` over samples of the comass of `ω` on the oriented frame.
    pub min_comass: f64,
    /// `max |dβ|` over the `H¹` basis.
    pub h1_closed_residual: f64,
    pub mu_positive: bool,
    pub samples: usize,
}

impl InvariantReport {
    pub fn passes(&self) -> bool {
        self.exactness_residual < 1e-8
            && self.min_comass > 0.0
            && self.h1_closed_residual < 1e-8
            && self.mu_positive
    }
}

fn comass_on_frame(omega: &Covector, frame: &[Vector; 3]) -> f64 {
    let a = omega.eval(&[frame[1], frame[2]]).unwrap_or(0.0);
    let b = omega.eval(&[frame[2], frame[0]]).unwrap_or(0.0);
    let c = omega.eval(&[frame[0], frame[1]]).unwrap_or(0.0);
    (a * a + b * b + c * c).sqrt()
}

/// Checks exactness of `ω`, its non-vanishing, closedness of the `H¹` basis
/// and positivity of `μ` at pseudo-random points.
pub fn check_model_invariants(model: &Model, exactness_samples: usize, comass_samples: usize, seed: u64) -> Result<InvariantReport> {
    let mut exact = 0.0f64;
    let mut closed = 0.0f64;
    let mut positive = true;
    for p in model.sample_points(exactness_samples, seed) {
        let d_alpha = fd_exterior_derivative_extrapolated(&model.alpha, &p, 4.0 * FD_STEP)?;
        let w = model.omega.at(&p);
        let diff = d_alpha.add(&w.scale(-1.0))?;
        exact = exact.max(diff.max_abs() / (1.0 + w.max_abs()));
        for beta in &model.h1_basis {
            let db = fd_exterior_derivative_extrapolated(beta, &p, 4.0 * FD_STEP)?;
            closed = closed.max(db.max_abs());
        }
    }
    let mut min_comass = f64::INFINITY;
    for p in model.sample_points(comass_samples, seed ^ 0x9e37_79b9) {
        let frame = model.frame(&p);
        min_comass = min_comass.min(comass_on_frame(&model.omega.at(&p), &frame));
        positive &= model.mu_density(&p, &frame) > 0.0;
    }
    Ok(InvariantReport {
        exactness_residual: exact,
        min_comass,
        h1_closed_residual: closed,
        mu_positive: positive && model.mu.positive,
        samples: exactness_samples,
    })
}

pub(crate) fn wrap_pi(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

pub(crate) fn coordinate_one_form(dim: usize, axis: usize, label: &str) -> Result<FormField> {
    let mut c = [0.0; 4];
    c[axis] = 1.0;
    FormField::new(label, dim, 1, move |_| Covector::one_form(dim, &c))?
        .with_derivative(FormField::zero(dim, 2)?)
}

pub(crate) fn standard_frame() -> [Vector; 3] {
    [
        Vector::new(1.0, 0.0, 0.0, 0.0),
        Vector::new(0.0, 1.0, 0.0, 0.0),
        Vector::new(0.0, 0.0, 1.0, 0.0),
    ]
}

/// Catalog of models used by the self-test and the acceptance suite.
pub fn catalog() -> Result<Vec<Model>> {
    Ok(vec![
        build_t3_contact()?,
        build_levelset(LevelSetSpec::sphere())?,
        build_levelset(LevelSetSpec::ellipsoid(1.0, crate::GOLDEN_RATIO))?,
        build_magnetic_torus(MagneticSpec::sin_x(0.05))?,
        build_hyperbolic_utb(0.5)?,
        build_hyperbolic_utb(1.0)?,
        build_hyperbolic_utb(1.5)?,
    ])
}
