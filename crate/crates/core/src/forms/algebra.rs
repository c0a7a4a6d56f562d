//! Pointwise exterior algebra in dimensions up to four.
//!
//! A [`Covector`] holds the components of an alternating k-form at a single
//! point, indexed by increasing index sets in lexicographic order. Index sets
//! are stored as bitmasks, so `0b0101` is `dx0 ∧ dx2`.

use crate::error::{CharflowError, Result};
use crate::Vector;

pub const MAX_DIM: usize = 4;
const MAX_COMPONENTS: usize = 6;

/// Lexicographic increasing index sets for `(dim, degree)`.
pub fn index_sets(dim: usize, degree: usize) -> &'static [u8] {
    match (dim, degree) {
        (_, 0) => &[0],
        (1, 1) => &[0b1],
        (2, 1) => &[0b01, 0b10],
        (2, 2) => &[0b11],
        (3, 1) => &[0b001, 0b010, 0b100],
        (3, 2) => &[0b011, 0b101, 0b110],
        (3, 3) => &[0b111],
        (4, 1) => &[0b0001, 0b0010, 0b0100, 0b1000],
        (4, 2) => &[0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100],
        (4, 3) => &[0b0111, 0b1011, 0b1101, 0b1110],
        (4, 4) => &[0b1111],
        _ => &[],
    }
}

/// Number of components of a k-form in dimension `dim`.
pub fn component_count(dim: usize, degree: usize) -> usize {
    index_sets(dim, degree).len()
}

/// Sign of the permutation that sorts the concatenation `I ++ J` of two
/// disjoint increasing index sets.
fn merge_sign(i: u8, j: u8) -> f64 {
    let mut inversions = 0u32;
    let mut rest = j;
    while rest != 0 {
        let b = rest.trailing_zeros();
        // elements of I strictly greater than b sit before b
        inversions += (i >> (b + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn indices_of(mask: u8) -> ([usize; MAX_DIM], usize) {
    let mut out = [0usize; MAX_DIM];
    let mut n = 0;
    for b in 0..MAX_DIM {
        if mask & (1 << b) != 0 {
            out[n] = b;
            n += 1;
        }
    }
    (out, n)
}

/// Determinant of the leading `k×k` block.
pub(crate) fn det(k: usize, m: &[[f64; MAX_DIM]; MAX_DIM]) -> f64 {
    match k {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        4 => {
            let mut total = 0.0;
            for col in 0..4 {
                let mut minor = [[0.0; MAX_DIM]; MAX_DIM];
                for r in 1..4 {
                    let mut cc = 0;
                    for c in 0..4 {
                        if c != col {
                            minor[r - 1][cc] = m[r][c];
                            cc += 1;
                        }
                    }
                }
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * m[0][col] * det(3, &minor);
            }
            total
        }
        _ => unreachable!("determinant of order {k}"),
    }
}

/// Components of a k-form at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covector {
    dim: u8,
    degree: u8,
    comps: [f64; MAX_COMPONENTS],
}

impl Covector {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(CharflowError::FormMismatch(format!(
                "ambient dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if degree > dim {
            return Err(CharflowError::DegreeOverflow { degree, dim });
        }
        Ok(Self {
            dim: dim as u8,
            degree: degree as u8,
            comps: [0.0; MAX_COMPONENTS],
        })
    }

    /// Builds a covector from components listed in lexicographic index-set order.
    pub fn from_components(dim: usize, degree: usize, comps: &[f64]) -> Result<Self> {
        let mut out = Self::zero(dim, degree)?;
        let n = component_count(dim, degree);
        if comps.len() != n {
            return Err(CharflowError::FormMismatch(format!(
                "expected {n} components for a {degree}-form in dimension {dim}, got {}",
                comps.len()
            )));
        }
        out.comps[..n].copy_from_slice(comps);
        Ok(out)
    }

    /// A 0-form.
    pub fn scalar(dim: usize, value: f64) -> Self {
        let mut c = Self::zero(dim, 0).expect("valid dimension");
        c.comps[0] = value;
        c
    }

    /// A 1-form from its coefficients on `dx0, dx1, ...`.
    pub fn one_form(dim: usize, coeffs: &[f64]) -> Self {
        Self::from_components(dim, 1, &coeffs[..dim]).expect("valid one-form")
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn degree(&self) -> usize {
        self.degree as usize
    }

    pub fn components(&self) -> &[f64] {
        &self.comps[..component_count(self.dim(), self.degree())]
    }

    pub fn components_mut(&mut self) -> &mut [f64] {
        let n = component_count(self.dim(), self.degree());
        &mut self.comps[..n]
    }

    fn slot(&self, mask: u8) -> Option<usize> {
        index_sets(self.dim(), self.degree())
            .iter()
            .position(|&m| m == mask)
    }

    /// Component on the basis element indexed by `mask`.
    pub fn component(&self, mask: u8) -> f64 {
        self.slot(mask).map_or(0.0, |s| self.comps[s])
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(CharflowError::FormMismatch(format!(
                "cannot combine a {}-form in dim {} with a {}-form in dim {}",
                self.degree, self.dim, other.degree, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = *self;
        for (a, b) in out.comps.iter_mut().zip(other.comps.iter()) {
            *a += b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.comps.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.components().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        Ok(self.wedge_with_bound(other)?.0)
    }

    /// Wedge product together with the componentwise sum of absolute term
    /// magnitudes, used as a rounding-error bound.
    pub fn wedge_with_bound(&self, other: &Self) -> Result<(Self, Self)> {
        if self.dim != other.dim {
            return Err(CharflowError::FormMismatch(format!(
                "wedge of forms in dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        let dim = self.dim();
        let degree = self.degree() + other.degree();
        if degree > dim {
            return Err(CharflowError::DegreeOverflow { degree, dim });
        }
        let mut value = Self::zero(dim, degree)?;
        let mut bound = Self::zero(dim, degree)?;
        let targets = index_sets(dim, degree);
        for (ia, &ma) in index_sets(dim, self.degree()).iter().enumerate() {
            let a = self.comps[ia];
            if a == 0.0 {
                continue;
            }
            for (ib, &mb) in index_sets(dim, other.degree()).iter().enumerate() {
                if ma & mb != 0 {
                    continue;
                }
                let b = other.comps[ib];
                let slot = targets
                    .iter()
                    .position(|&m| m == ma | mb)
                    .expect("union of disjoint index sets is an index set");
                value.comps[slot] += merge_sign(ma, mb) * a * b;
                bound.comps[slot] += (a * b).abs();
            }
        }
        Ok((value, bound))
    }

    /// Interior product `i_v` of the form with a vector.
    pub fn interior(&self, v: &Vector) -> Result<Self> {
        let dim = self.dim();
        if self.degree() == 0 {
            return Err(CharflowError::FormMismatch(
                "interior product of a 0-form".into(),
            ));
        }
        let mut out = Self::zero(dim, self.degree() - 1)?;
        let targets = index_sets(dim, self.degree() - 1);
        for (slot, &mask) in index_sets(dim, self.degree()).iter().enumerate() {
            let c = self.comps[slot];
            if c == 0.0 {
                continue;
            }
            let (idx, n) = indices_of(mask);
            for (pos, &i) in idx[..n].iter().enumerate() {
                let rest = mask & !(1 << i);
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                let t = targets.iter().position(|&m| m == rest).expect("subset");
                out.comps[t] += sign * c * v[i];
            }
        }
        Ok(out)
    }

    /// Evaluates the form on `degree` tangent vectors.
    pub fn eval(&self, vectors: &[Vector]) -> Result<f64> {
        Ok(self.eval_with_bound(vectors, None)?.0)
    }

    /// Evaluation plus a magnitude bound; `bound` carries per-component term
    /// magnitudes (from [`Covector::wedge_with_bound`]) or `None` for plain
    /// absolute components.
    pub fn eval_with_bound(&self, vectors: &[Vector], bound: Option<&Self>) -> Result<(f64, f64)> {
        let k = self.degree();
        if vectors.len() != k {
            return Err(CharflowError::FormMismatch(format!(
                "a {k}-form takes {k} vectors, got {}",
                vectors.len()
            )));
        }
        let mut value = 0.0;
        let mut mag = 0.0;
        for (slot, &mask) in index_sets(self.dim(), k).iter().enumerate() {
            let (idx, n) = indices_of(mask);
            let mut m = [[0.0; MAX_DIM]; MAX_DIM];
            for (r, &row) in idx[..n].iter().enumerate() {
                for (c, v) in vectors.iter().enumerate() {
                    m[r][c] = v[row];
                }
            }
            let d = det(k, &m);
            value += self.comps[slot] * d;
            let b = bound.map_or(self.comps[slot].abs(), |b| b.comps[slot]);
            mag += b * d.abs();
        }
        Ok((value, mag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize) -> Vector {
        let mut v = Vector::zeros();
        v[i] = 1.0;
        v
    }

    #[test]
    fn coordinate_wedge_on_coordinate_frame() {
        let dx = Covector::one_form(3, &[1.0, 0.0, 0.0]);
        let dy = Covector::one_form(3, &[0.0, 1.0, 0.0]);
        let w = dx.wedge(&dy).unwrap();
        assert_eq!(w.eval(&[e(0), e(1)]).unwrap(), 1.0);
        assert_eq!(w.eval(&[e(1), e(0)]).unwrap(), -1.0);
        let ww = dx.wedge(&dx).unwrap();
        assert_eq!(ww.eval(&[e(0), e(1)]).unwrap(), 0.0);
        assert_eq!(ww.max_abs(), 0.0);
    }

    #[test]
    fn degree_overflow_is_reported() {
        let dx = Covector::one_form(3, &[1.0, 0.0, 0.0]);
        let vol = Covector::from_components(3, 3, &[1.0]).unwrap();
        let err = dx.wedge(&vol).unwrap_err();
        assert!(err.to_string().contains("degree exceeds dimension"));
    }

    #[test]
    fn merge_sign_matches_transpositions() {
        // dx2 ∧ dx0 = -dx0 ∧ dx2
        assert_eq!(merge_sign(0b100, 0b001), -1.0);
        assert_eq!(merge_sign(0b001, 0b100), 1.0);
        // (dx1∧dx2) ∧ dx0 = dx0∧dx1∧dx2
        assert_eq!(merge_sign(0b110, 0b001), 1.0);
        // dx1 ∧ (dx0 ∧ dx2) = -dx0∧dx1∧dx2
        assert_eq!(merge_sign(0b010, 0b101), -1.0);
    }

    #[test]
    fn interior_of_volume() {
        let vol = Covector::from_components(3, 3, &[1.0]).unwrap();
        let x = Vector::new(2.0, 3.0, 5.0, 0.0);
        let i = vol.interior(&x).unwrap();
        // i_X(dx∧dy∧dz) = X1 dy∧dz − X2 dx∧dz + X3 dx∧dy
        assert_eq!(i.component(0b110), 2.0);
        assert_eq!(i.component(0b101), -3.0);
        assert_eq!(i.component(0b011), 5.0);
    }

    #[test]
    fn four_dimensional_determinant() {
        let vol = Covector::from_components(4, 4, &[1.0]).unwrap();
        let v = [
            Vector::new(2.0, 0.0, 0.0, 1.0),
            Vector::new(0.0, 1.0, 0.0, 0.0),
            Vector::new(0.0, 0.0, 3.0, 0.0),
            Vector::new(1.0, 0.0, 0.0, 1.0),
        ];
        // block determinant: (2·1 − 1·1)·1·3
        assert!((vol.eval(&v).unwrap() - 3.0).abs() < 1e-15);
    }
}
