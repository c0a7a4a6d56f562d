use std::fmt;
use std::sync::Arc;

use super::algebra::{index_sets, Covector};
use crate::error::{CharflowError, Result};
use crate::{Point, Vector};

/// Central-difference step in chart coordinates.
pub const FD_STEP: f64 = 1e-4;

type FormEval = dyn Fn(&Point) -> Covector + Send + Sync;
type ScalarEval = dyn Fn(&Point) -> f64 + Send + Sync;
type GradientEval = dyn Fn(&Point) -> Vector + Send + Sync;

/// A smooth function on chart coordinates with an optional analytic gradient.
#[derive(Clone)]
pub struct ScalarFunction {
    label: String,
    dim: usize,
    value: Arc<ScalarEval>,
    gradient: Option<Arc<GradientEval>>,
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarFunction {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&Point) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, p: &Point) -> f64 {
        (self.value)(p)
    }

    pub fn gradient(&self, p: &Point) -> Vector {
        if let Some(g) = &self.gradient {
            return g(p);
        }
        let mut out = Vector::zeros();
        for i in 0..self.dim {
            let mut a = *p;
            let mut b = *p;
            a[i] += FD_STEP;
            b[i] -= FD_STEP;
            out[i] = (self.value(&a) - self.value(&b)) / (2.0 * FD_STEP);
        }
        out
    }

    /// Linear combination `Σ c_k f_k`.
    pub fn combination(label: impl Into<String>, terms: Vec<(f64, ScalarFunction)>) -> Self {
        let dim = terms.first().map_or(3, |(_, f)| f.dim);
        let value_terms = terms.clone();
        let grad_terms = terms;
        ScalarFunction::new(label, dim, move |p| {
            value_terms.iter().map(|(c, f)| c * f.value(p)).sum()
        })
        .with_gradient(move |p| {
            grad_terms
                .iter()
                .fold(Vector::zeros(), |acc, (c, f)| acc + f.gradient(p) * *c)
        })
    }
}

/// A differential form given as a pointwise component evaluator on chart
/// coordinates, optionally carrying its exterior derivative in closed form.
#[derive(Clone)]
pub struct FormField {
    label: String,
    dim: usize,
    degree: usize,
    eval: Arc<FormEval>,
    derivative: Option<Arc<FormField>>,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl FormField {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        degree: usize,
        eval: impl Fn(&Point) -> Covector + Send + Sync + 'static,
    ) -> Result<Self> {
        if degree > dim {
            return Err(CharflowError::DegreeOverflow { degree, dim });
        }
        Ok(Self {
            label: label.into(),
            dim,
            degree,
            eval: Arc::new(eval),
            derivative: None,
        })
    }

    pub fn with_derivative(mut self, d: FormField) -> Result<Self> {
        if d.degree != self.degree + 1 || d.dim != self.dim {
            return Err(CharflowError::FormMismatch(format!(
                "derivative of `{}` must be a {}-form in dim {}",
                self.label,
                self.degree + 1,
                self.dim
            )));
        }
        self.derivative = Some(Arc::new(d));
        Ok(self)
    }

    /// The zero k-form, closed by construction.
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        let z = Covector::zero(dim, degree)?;
        let mut f = Self::new("0", dim, degree, move |_| z)?;
        if degree < dim {
            f = f.with_derivative(Self::new("0", dim, degree + 1, move |_| {
                Covector::zero(dim, degree + 1).expect("checked")
            })?)?;
        }
        Ok(f)
    }

    /// The exact 1-form `df`, with `d(df) = 0` attached.
    pub fn exact(f: &ScalarFunction) -> Result<Self> {
        let dim = f.dim();
        let g = f.clone();
        Self::new(format!("d({})", f.label()), dim, 1, move |p| {
            Covector::one_form(dim, g.gradient(p).as_slice())
        })?
        .with_derivative(Self::zero(dim, 2)?)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn analytic_derivative(&self) -> Option<&FormField> {
        self.derivative.as_deref()
    }

    pub fn at(&self, p: &Point) -> Covector {
        (self.eval)(p)
    }

    pub fn eval(&self, p: &Point, vectors: &[Vector]) -> Result<f64> {
        self.at(p).eval(vectors)
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Pointwise sum; the derivative is kept when both summands carry one.
    pub fn add(&self, other: &FormField) -> Result<FormField> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(CharflowError::FormMismatch(format!(
                "cannot add `{}` and `{}`",
                self.label, other.label
            )));
        }
        let (a, b) = (self.clone(), other.clone());
        let mut sum = FormField::new(
            format!("{} + {}", self.label, other.label),
            self.dim,
            self.degree,
            move |p| a.at(p).add(&b.at(p)).expect("same shape"),
        )?;
        if let (Some(da), Some(db)) = (&self.derivative, &other.derivative) {
            sum = sum.with_derivative(da.add(db)?)?;
        }
        Ok(sum)
    }

    pub fn scale(&self, s: f64) -> FormField {
        let a = self.clone();
        let mut out = FormField {
            label: format!("{s}·{}", self.label),
            dim: self.dim,
            degree: self.degree,
            eval: Arc::new(move |p| a.at(p).scale(s)),
            derivative: None,
        };
        if let Some(d) = &self.derivative {
            out.derivative = Some(Arc::new(d.scale(s)));
        }
        out
    }

    /// Pointwise wedge product; Leibniz rule supplies the derivative when both
    /// factors carry one.
    pub fn wedge(&self, other: &FormField) -> Result<FormField> {
        if self.dim != other.dim {
            return Err(CharflowError::FormMismatch(format!(
                "wedge of `{}` (dim {}) with `{}` (dim {})",
                self.label, self.dim, other.label, other.dim
            )));
        }
        let degree = self.degree + other.degree;
        if degree > self.dim {
            return Err(CharflowError::DegreeOverflow {
                degree,
                dim: self.dim,
            });
        }
        let (a, b) = (self.clone(), other.clone());
        let mut w = FormField::new(
            format!("{} ∧ {}", self.label, other.label),
            self.dim,
            degree,
            move |p| a.at(p).wedge(&b.at(p)).expect("degrees checked"),
        )?;
        if degree < self.dim {
            if let (Some(da), Some(db)) = (&self.derivative, &other.derivative) {
                let sign = if self.degree % 2 == 0 { 1.0 } else { -1.0 };
                let d = da.wedge(other)?.add(&self.wedge(db)?.scale(sign))?;
                w = w.with_derivative(d)?;
            }
        }
        Ok(w)
    }
}

/// `(a ∧ b)(v_1, …, v_{k+l})` at `p`.
pub fn wedge_eval(a: &FormField, b: &FormField, p: &Point, vectors: &[Vector]) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(CharflowError::FormMismatch(
            "wedge of forms in different dimensions".into(),
        ));
    }
    a.at(p).wedge(&b.at(p))?.eval(vectors)
}

/// Finite-difference exterior derivative at `p` by central differences of the
/// components with step `h`.
pub fn fd_exterior_derivative(a: &FormField, p: &Point, h: f64) -> Result<Covector> {
    let dim = a.dim();
    let k = a.degree();
    if k >= dim {
        return Err(CharflowError::DegreeOverflow { degree: k + 1, dim });
    }
    let mut partials = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut plus = *p;
        let mut minus = *p;
        plus[j] += h;
        minus[j] -= h;
        let diff = a.at(&plus).add(&a.at(&minus).scale(-1.0))?;
        partials.push(diff.scale(0.5 / h));
    }
    let source_sets = index_sets(dim, k);
    let mut out = Covector::zero(dim, k + 1)?;
    for (slot, &mask) in index_sets(dim, k + 1).iter().enumerate() {
        let mut acc = 0.0;
        let mut pos = 0;
        for j in 0..dim {
            if mask & (1 << j) == 0 {
                continue;
            }
            let rest = mask & !(1 << j);
            let src = source_sets
                .iter()
                .position(|&m| m == rest)
                .expect("subset of an index set");
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * partials[j].components()[src];
            pos += 1;
        }
        out.components_mut()[slot] = acc;
    }
    Ok(out)
}

/// Richardson-extrapolated central differences, accurate to `O(h⁴)`.
pub fn fd_exterior_derivative_extrapolated(a: &FormField, p: &Point, h: f64) -> Result<Covector> {
    let coarse = fd_exterior_derivative(a, p, h)?;
    let fine = fd_exterior_derivative(a, p, h / 2.0)?;
    fine.scale(4.0 / 3.0).add(&coarse.scale(-1.0 / 3.0))
}

/// `(da)(v_1, …, v_{k+1})` at `p`: the analytic derivative when present,
/// otherwise central differences with step `h`.
pub fn exterior_derivative_eval(a: &FormField, p: &Point, vectors: &[Vector], h: f64) -> Result<f64> {
    if a.degree() >= a.dim() {
        return Err(CharflowError::DegreeOverflow {
            degree: a.degree() + 1,
            dim: a.dim(),
        });
    }
    match a.analytic_derivative() {
        Some(d) => d.eval(p, vectors),
        None => fd_exterior_derivative(a, p, h)?.eval(vectors),
    }
}

/// `da` as a form field: the analytic derivative when present, otherwise a
/// finite-difference field with step `h`.
pub fn exterior_derivative(a: &FormField, h: f64) -> Result<FormField> {
    if let Some(d) = a.analytic_derivative() {
        return Ok(d.clone());
    }
    if a.degree() >= a.dim() {
        return Err(CharflowError::DegreeOverflow {
            degree: a.degree() + 1,
            dim: a.dim(),
        });
    }
    let src = a.clone();
    FormField::new(format!("d({})", a.label()), a.dim(), a.degree() + 1, move |p| {
        fd_exterior_derivative(&src, p, h).expect("degree checked")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize) -> Vector {
        let mut v = Vector::zeros();
        v[i] = 1.0;
        v
    }

    fn t3_alpha() -> FormField {
        FormField::new("alpha", 3, 1, |p| {
            Covector::one_form(3, &[p[2].cos(), p[2].sin(), 0.0])
        })
        .unwrap()
    }

    // ω = dα written out by hand: −sin z dz∧dx + cos z dz∧dy
    fn t3_omega_by_hand() -> FormField {
        FormField::new("omega", 3, 2, |p| {
            let (s, c) = p[2].sin_cos();
            // components on (dx∧dy, dx∧dz, dy∧dz)
            Covector::from_components(3, 2, &[0.0, s, -c]).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn t3_contact_density_is_minus_one() {
        let (a, w) = (t3_alpha(), t3_omega_by_hand());
        for z in [0.0, 0.4, 1.3, 2.9, -2.2] {
            let p = Point::new(0.3, -1.1, z, 0.0);
            let v = wedge_eval(&a, &w, &p, &[e(0), e(1), e(2)]).unwrap();
            assert!((v + 1.0).abs() < 1e-15, "z = {z}: {v}");
        }
    }

    #[test]
    fn d_of_x_dy_is_area() {
        let f = FormField::new("x dy", 3, 1, |p| Covector::one_form(3, &[0.0, p[0], 0.0])).unwrap();
        let p = Point::new(0.7, 0.2, -0.4, 0.0);
        let v = exterior_derivative_eval(&f, &p, &[e(0), e(1)], FD_STEP).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn d_alpha_on_e3_e1_is_minus_sin_z() {
        let a = t3_alpha();
        for z in [0.1, 0.9, 2.5] {
            let p = Point::new(0.0, 0.0, z, 0.0);
            let v = exterior_derivative_eval(&a, &p, &[e(2), e(0)], FD_STEP).unwrap();
            assert!((v + z.sin()).abs() < 1e-8, "z = {z}: {v}");
        }
    }

    #[test]
    fn d_squared_vanishes_numerically() {
        let f = ScalarFunction::new("sin x sin y", 3, |p| p[0].sin() * p[1].sin());
        let df = FormField::exact(&f).unwrap();
        // strip the attached derivative so both d's are finite differences
        let df_raw = FormField::new("df", 3, 1, {
            let f = f.clone();
            move |p| Covector::one_form(3, f.gradient(p).as_slice())
        })
        .unwrap();
        assert!(df.analytic_derivative().is_some());
        for p in [Point::new(0.3, 1.2, 0.0, 0.0), Point::new(-2.0, 0.5, 1.0, 0.0)] {
            let ddf = fd_exterior_derivative(&df_raw, &p, FD_STEP).unwrap();
            assert!(ddf.max_abs() < 1e-6, "{ddf:?}");
        }
    }

    #[test]
    fn leibniz_derivative_matches_finite_differences() {
        let a = t3_alpha().with_derivative(t3_omega_by_hand()).unwrap();
        let f = ScalarFunction::new("g", 3, |p| (p[0] + 2.0 * p[1]).sin())
            .with_gradient(|p| {
                let c = (p[0] + 2.0 * p[1]).cos();
                Vector::new(c, 2.0 * c, 0.0, 0.0)
            });
        let b = FormField::exact(&f).unwrap();
        let w = a.wedge(&b).unwrap();
        let d = w.analytic_derivative().expect("Leibniz");
        let p = Point::new(0.2, -0.3, 0.8, 0.0);
        let fd = fd_exterior_derivative(&w, &p, FD_STEP).unwrap();
        let exact = d.at(&p);
        assert!((fd.components()[0] - exact.components()[0]).abs() < 1e-7);
    }

    #[test]
    fn analytic_derivative_converges_at_second_order() {
        let a = t3_alpha();
        let w = t3_omega_by_hand();
        let p = Point::new(0.5, 0.5, 0.77, 0.0);
        let err = |h: f64| {
            let fd = fd_exterior_derivative(&a, &p, h).unwrap();
            let ex = w.at(&p);
            fd.components()
                .iter()
                .zip(ex.components())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn degree_overflow_in_derivative() {
        let vol = FormField::new("vol", 3, 3, |_| Covector::from_components(3, 3, &[1.0]).unwrap())
            .unwrap();
        assert!(matches!(
            exterior_derivative(&vol, FD_STEP),
            Err(CharflowError::DegreeOverflow { .. })
        ));
    }
}
