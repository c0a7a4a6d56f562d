//! Polynomials on `R⁴` used as Hamiltonians of level-set models.

use serde::{Deserialize, Serialize};

use crate::{Point, Vector};

/// One monomial `coeff · x₁^e₁ y₁^e₂ x₂^e₃ y₂^e₄`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: [u32; 4],
}

/// Sparse polynomial in `(x₁, y₁, x₂, y₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Polynomial4 {
    pub terms: Vec<Monomial>,
}

impl Polynomial4 {
    pub fn new(terms: Vec<(f64, [u32; 4])>) -> Self {
        Self {
            terms: terms
                .into_iter()
                .map(|(coeff, exponents)| Monomial { coeff, exponents })
                .collect(),
        }
    }

    /// Diagonal quadratic `Σ q_i x_i²`.
    pub fn diagonal_quadratic(q: [f64; 4]) -> Self {
        let mut terms = Vec::new();
        for (i, &c) in q.iter().enumerate() {
            if c != 0.0 {
                let mut e = [0; 4];
                e[i] = 2;
                terms.push((c, e));
            }
        }
        Self::new(terms)
    }

    pub fn value(&self, p: &Point) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * (0..4).map(|i| p[i].powi(m.exponents[i] as i32)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, p: &Point) -> Vector {
        let mut g = Vector::zeros();
        for m in &self.terms {
            for i in 0..4 {
                let e = m.exponents[i];
                if e == 0 {
                    continue;
                }
                let mut t = m.coeff * e as f64;
                for j in 0..4 {
                    let ej = if j == i { e - 1 } else { m.exponents[j] };
                    t *= p[j].powi(ej as i32);
                }
                g[i] += t;
            }
        }
        g
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|m| m.exponents.iter().sum()).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_mixed_term() {
        let p4 = Polynomial4::new(vec![(2.0, [1, 2, 0, 1]), (-1.0, [0, 0, 3, 0])]);
        let p = Point::new(0.5, -1.5, 0.7, 2.0);
        let g = p4.gradient(&p);
        for i in 0..4 {
            let mut a = p;
            let mut b = p;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            assert!(((p4.value(&a) - p4.value(&b)) / 2e-6 - g[i]).abs() < 1e-6);
        }
        assert_eq!(p4.degree(), 4);
    }
}
