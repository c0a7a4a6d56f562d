//! Contact margins, sampled contact certificates by linear programming and
//! the action-sign obstruction.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{characteristic_field, OrbitRecord};
use crate::error::{CharflowError, Result};
use crate::forms::{fd_exterior_derivative_extrapolated, halton, FormField, ScalarFunction, FD_STEP};
use crate::models::Model;
use crate::Point;

const PRIMITIVE_CHECK_SAMPLES: usize = 64;
const PRIMITIVE_TOL: f64 = 1e-6;
/// Margins within this of zero are not separated from zero by the solver.
const LP_SLACK: f64 = 1e-9;

/// Errors unless `dβ = ω` on a sample of points.
pub fn check_primitive(model: &Model, beta: &FormField, seed: u64) -> Result<()> {
    if beta.degree() != 1 || beta.dim() != model.coord_dim() {
        return Err(CharflowError::FormMismatch(format!(
            "`{}` is not a 1-form in chart dimension {}",
            beta.label(),
            model.coord_dim()
        )));
    }
    let mut worst = 0.0f64;
    for p in model.sample_points(PRIMITIVE_CHECK_SAMPLES, seed) {
        let d = match beta.analytic_derivative() {
            Some(d) => d.at(&p),
            None => fd_exterior_derivative_extrapolated(beta, &p, 4.0 * FD_STEP)?,
        };
        let w = model.omega.at(&p);
        worst = worst.max(d.add(&w.scale(-1.0))?.max_abs() / (1.0 + w.max_abs()));
    }
    if worst > PRIMITIVE_TOL {
        return Err(CharflowError::NotAPrimitive(worst));
    }
    Ok(())
}

/// `(β ∧ ω)/μ`, which equals `β(X)`.
fn density(model: &Model, beta: &FormField, p: &Point) -> Result<f64> {
    beta.eval(p, &[characteristic_field(model, p)?])
}

/// `(min |r|, sign)` of `r = (β ∧ ω)/μ` over `samples` random points, or
/// `(0, 0)` when `r` changes sign.
pub fn contact_margin(model: &Model, primitive: &FormField, samples: usize, seed: u64) -> Result<(f64, i8)> {
    check_primitive(model, primitive, seed ^ 0x5a5a)?;
    let pts = model.sample_points(samples, seed);
    let rs: Vec<f64> = pts.par_iter().map(|p| density(model, primitive, p)).collect::<Result<_>>()?;
    let (lo, hi) = rs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(*r), b.max(*r)));
    Ok(if lo > 0.0 {
        (lo, 1)
    } else if hi < 0.0 {
        (-hi, -1)
    } else {
        (0.0, 0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    ContactCertified,
    InfeasibleOnSamples,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateResult {
    pub status: CertificateStatus,
    /// LP margin `t` on the constraint samples, in μ units.
    pub margin: f64,
    pub sign: i8,
    pub coefficients: Vec<f64>,
    pub basis: Vec<String>,
    pub sample_count: usize,
    pub basis_cap: usize,
    /// `min s·r` over the fresh revalidation samples.
    pub revalidated_margin: f64,
    pub revalidation_samples: usize,
    /// LP optimum for `+1` and `−1`.
    pub sign_margins: [f64; 2],
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CertificateResult {
    /// The certified primitive `α + Σ c_j df_j`.
    pub fn primitive(&self, model: &Model) -> Result<FormField> {
        let basis = model.function_basis(self.basis_cap);
        let f = ScalarFunction::combination(
            "certificate",
            basis.into_iter().zip(&self.coefficients).map(|(b, c)| (*c, b)).collect(),
        );
        model.alpha.add(&FormField::exact(&f)?)
    }
}

/// Column per basis function: `df_j(X)` at every sample, plus `α(X)`.
fn assemble(model: &Model, basis: &[ScalarFunction], pts: &[Point]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let rows: Vec<(f64, Vec<f64>)> = pts
        .par_iter()
        .map(|p| {
            let x = characteristic_field(model, p)?;
            let r0 = model.alpha.eval(p, &[x])?;
            let rs = basis.iter().map(|f| f.gradient(p).dot(&x)).collect();
            Ok((r0, rs))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().unzip())
}

/// `max t` subject to `s·(r0 + Σ c_j r_j) ≥ t` at every sample.
///
/// The LP runs over an orthonormal basis of the column space: basis
/// functions dependent along `X` (sums constant on level sets, functions of
/// conserved coordinates) otherwise leave the simplex badly conditioned.
fn solve_margin(r0: &[f64], rows: &[Vec<f64>], sign: f64) -> Result<(f64, Vec<f64>)> {
    let n = rows.first().map_or(0, |r| r.len());
    let m = rows.len();
    let mat = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-9 * smax && smax > 0.0)
        .collect();
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    let root_m = (m as f64).sqrt();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let ds: Vec<_> = keep.iter().map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for (i, a) in r0.iter().enumerate() {
        let mut terms: Vec<(Variable, f64)> =
            ds.iter().zip(&keep).map(|(d, &k)| (*d, sign * u[(i, k)] * root_m)).collect();
        terms.push((t, -1.0));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, -sign * a);
    }
    match lp.solve() {
        Ok(sol) => {
            // R c = √m U d  ⇒  c = V S⁻¹ √m d
            let mut coef = vec![0.0; n];
            for (d, &k) in ds.iter().zip(&keep) {
                let w = *sol.var_value(*d) * root_m / svd.singular_values[k];
                for (j, c) in coef.iter_mut().enumerate() {
                    *c += vt[(k, j)] * w;
                }
            }
            Ok((sol.objective(), coef))
        }
        Err(minilp::Error::Unbounded) => Err(CharflowError::Internal("contact LP is unbounded".into())),
        Err(e) => Err(CharflowError::Internal(format!("contact LP failed: {e}"))),
    }
}

/// Searches `α + df` with `f` in the model's basis of degree `basis_cap`
/// maximizing the sampled contact margin, for both signs.
pub fn certify_contact(model: &Model, basis_cap: usize, sample_count: usize, seed: u64) -> Result<CertificateResult> {
    if basis_cap < 1 {
        return Err(CharflowError::InvalidArgument("basis cap must be at least 1".into()));
    }
    let basis = model.function_basis(basis_cap);
    if sample_count < 10 * basis.len().max(1) {
        return Err(CharflowError::InvalidArgument(format!(
            "certification needs at least {} samples for {} basis functions",
            10 * basis.len().max(1),
            basis.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = [rng.gen(), rng.gen(), rng.gen()];
    let pts: Vec<Point> = (0..sample_count)
        .map(|i| model.map_unit_cube(halton(i as u64 + 1, shift)).0)
        .collect();
    let (r0, rows) = assemble(model, &basis, &pts)?;
    let (t_plus, c_plus) = solve_margin(&r0, &rows, 1.0)?;
    let (t_minus, c_minus) = solve_margin(&r0, &rows, -1.0)?;
    let (margin, sign, coefficients) = if t_plus >= t_minus {
        (t_plus, 1i8, c_plus)
    } else {
        (t_minus, -1i8, c_minus)
    };
    let fresh_n = 10 * sample_count;
    let fresh = model.sample_points(fresh_n, seed ^ 0xf7e5_11);
    let (f0, frows) = assemble(model, &basis, &fresh)?;
    let s = sign as f64;
    let revalidated = f0
        .iter()
        .zip(&frows)
        .map(|(a, row)| s * (a + row.iter().zip(&coefficients).map(|(r, c)| r * c).sum::<f64>()))
        .fold(f64::INFINITY, f64::min);
    let mut notes = Vec::new();
    let status = if t_plus > LP_SLACK && t_minus > LP_SLACK {
        notes.push("both signs feasible on samples".into());
        CertificateStatus::Inconclusive
    } else if margin <= LP_SLACK {
        CertificateStatus::InfeasibleOnSamples
    } else if revalidated >= 0.95 * margin {
        CertificateStatus::ContactCertified
    } else {
        notes.push(format!("fresh-sample margin {revalidated:.3e} below 0.95 of {margin:.3e}"));
        CertificateStatus::Inconclusive
    };
    Ok(CertificateResult {
        status,
        margin,
        sign,
        coefficients,
        basis: basis.iter().map(|b| b.label().to_string()).collect(),
        sample_count,
        basis_cap,
        revalidated_margin: revalidated,
        revalidation_samples: fresh_n,
        sign_margins: [t_plus, t_minus],
        notes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Obstruction {
    Obstructed,
    Unobstructed,
}

const ACTION_FLOOR: f64 = 1e-6;

/// Obstructed iff two contractible closed orbits carry actions of strictly
/// opposite sign.
pub fn action_sign_obstruction(actions: &[f64], contractible: &[bool]) -> Obstruction {
    let signs = actions
        .iter()
        .zip(contractible)
        .filter(|(a, c)| **c && a.abs() > ACTION_FLOOR)
        .map(|(a, _)| a.signum());
    let (mut pos, mut neg) = (false, false);
    for s in signs {
        pos |= s > 0.0;
        neg |= s < 0.0;
    }
    if pos && neg {
        Obstruction::Obstructed
    } else {
        Obstruction::Unobstructed
    }
}

pub fn orbit_sign_obstruction(orbits: &[OrbitRecord]) -> Obstruction {
    let actions: Vec<f64> = orbits.iter().map(|o| o.action).collect();
    let flags: Vec<bool> = orbits.iter().map(|o| o.contractible).collect();
    action_sign_obstruction(&actions, &flags)
}

/// Downgrades a certificate contradicted by recorded orbit actions.
pub fn reconcile(mut cert: CertificateResult, obstruction: Obstruction) -> CertificateResult {
    if cert.status == CertificateStatus::ContactCertified && obstruction == Obstruction::Obstructed {
        cert.status = CertificateStatus::Inconclusive;
        cert.notes.push("contractible orbit actions of opposite sign".into());
    }
    cert
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_t3_contact;

    #[test]
    fn torus_margin() {
        let m = build_t3_contact().unwrap();
        let (margin, sign) = contact_margin(&m, &m.alpha, 2000, 1).unwrap();
        assert!((margin - 1.0).abs() < 1e-12);
        assert_eq!(sign, -1);
        let f = ScalarFunction::new("5 sin x", 3, |p| 5.0 * p[0].sin());
        let shifted = m.alpha.add(&FormField::exact(&f).unwrap()).unwrap();
        // r = −1 − 5 cos x cos z changes sign
        assert_eq!(contact_margin(&m, &shifted, 2000, 1).unwrap(), (0.0, 0));
        let f = ScalarFunction::new("0.1 sin x", 3, |p| 0.1 * p[0].sin());
        let shifted = m.alpha.add(&FormField::exact(&f).unwrap()).unwrap();
        let (margin, sign) = contact_margin(&m, &shifted, 2000, 1).unwrap();
        assert!(margin > 0.0 && margin <= 1.0);
        assert_eq!(sign, -1);
    }

    #[test]
    fn non_primitive_rejected() {
        let m = build_t3_contact().unwrap();
        let bad = m.alpha.scale(2.0);
        assert!(matches!(contact_margin(&m, &bad, 100, 1), Err(CharflowError::NotAPrimitive(_))));
    }

    #[test]
    fn obstruction_rules() {
        assert_eq!(action_sign_obstruction(&[1.0, 1.618], &[true, true]), Obstruction::Unobstructed);
        assert_eq!(action_sign_obstruction(&[1.0, -1.0], &[true, true]), Obstruction::Obstructed);
        assert_eq!(action_sign_obstruction(&[2.0 * std::f64::consts::PI], &[true]), Obstruction::Unobstructed);
        assert_eq!(action_sign_obstruction(&[1.0, -1.0], &[true, false]), Obstruction::Unobstructed);
        assert_eq!(action_sign_obstruction(&[1.0, -1e-9], &[true, true]), Obstruction::Unobstructed);
    }
}
