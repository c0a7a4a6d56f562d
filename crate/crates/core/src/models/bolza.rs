//! The Bolza surface as the regular hyperbolic octagon with opposite sides
//! paired, acting on `PSL(2,R)` by left multiplication.
//!
//! The octagon lives in the Poincaré disk, `w = (z − i)/(z + i)`, centred at
//! the origin with side midpoints at angles `kπ/4` and vertices at `(2k+1)π/8`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{Complex, Matrix2};

use crate::error::{CharflowError, Result};

/// Word-length cap of the greedy reduction.
pub const REDUCTION_CAP: usize = 64;

const I: Complex<f64> = Complex { re: 0.0, im: 1.0 };

/// Hyperbolic distance from the centre to each side, `acosh(1 + √2)`.
pub fn inradius() -> f64 {
    (1.0 + 2f64.sqrt()).acosh()
}

/// Distance from the centre to each vertex, `acosh(3 + 2√2)`.
pub fn circumradius() -> f64 {
    (3.0 + 2.0 * 2f64.sqrt()).acosh()
}

pub fn vertex_angle(k: usize) -> f64 {
    (2 * k + 1) as f64 * PI / 8.0
}

pub fn side_angle(k: usize) -> f64 {
    k as f64 * PI / 4.0
}

/// Point of `H²` stabilized by rotations: `g·i`.
pub fn base_point(g: &Matrix2<f64>) -> Complex<f64> {
    (I * g[(0, 0)] + g[(0, 1)]) / (I * g[(1, 0)] + g[(1, 1)])
}

pub fn to_disk(z: Complex<f64>) -> Complex<f64> {
    (z - I) / (z + I)
}

pub fn from_disk(w: Complex<f64>) -> Complex<f64> {
    I * (1.0 + w) / (1.0 - w)
}

pub fn disk_distance(a: Complex<f64>, b: Complex<f64>) -> f64 {
    let q = ((a - b) / (1.0 - a.conj() * b)).norm();
    2.0 * q.min(1.0 - 1e-16).atanh()
}

/// Distance from the disk origin.
pub fn disk_radius(w: Complex<f64>) -> f64 {
    2.0 * w.norm().min(1.0 - 1e-16).atanh()
}

fn mul2(a: &[[Complex<f64>; 2]; 2], b: &[[Complex<f64>; 2]; 2]) -> [[Complex<f64>; 2]; 2] {
    let mut out = [[Complex::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Translation by `2·inradius` toward the side midpoint at angle `kπ/4`.
fn side_pairing(k: usize) -> Matrix2<f64> {
    let half = inradius();
    let (ch, sh) = (half.cosh(), half.sinh());
    let phi = side_angle(k);
    let r = |a: f64| -> [[Complex<f64>; 2]; 2] {
        [
            [Complex::from_polar(1.0, a / 2.0), Complex::new(0.0, 0.0)],
            [Complex::new(0.0, 0.0), Complex::from_polar(1.0, -a / 2.0)],
        ]
    };
    let a: [[Complex<f64>; 2]; 2] = [
        [Complex::new(ch, 0.0), Complex::new(sh, 0.0)],
        [Complex::new(sh, 0.0), Complex::new(ch, 0.0)],
    ];
    let s = mul2(&mul2(&r(phi), &a), &r(-phi));
    // conjugate the disk isometry back to the upper half plane
    let c = [[Complex::new(1.0, 0.0), -I], [Complex::new(1.0, 0.0), I]];
    let det = I * 2.0;
    let c_inv = [[I / det, I / det], [-c[1][0] / det, c[0][0] / det]];
    let m = mul2(&mul2(&c_inv, &s), &c);
    Matrix2::new(m[0][0].re, m[0][1].re, m[1][0].re, m[1][1].re)
}

/// The eight side pairings; `T_{k+4} = T_k⁻¹`.
pub fn generators() -> &'static [Matrix2<f64>; 8] {
    static GENS: OnceLock<[Matrix2<f64>; 8]> = OnceLock::new();
    GENS.get_or_init(|| std::array::from_fn(side_pairing))
}

fn inverse_unimodular(g: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)])
}

/// Images of the disk origin under the side pairings.
fn neighbour_centres() -> &'static [Complex<f64>; 8] {
    static C: OnceLock<[Complex<f64>; 8]> = OnceLock::new();
    C.get_or_init(|| std::array::from_fn(|k| to_disk(base_point(&generators()[k]))))
}

/// Whether the disk point lies in the closed octagon (up to `tol`).
pub fn octagon_contains(w: Complex<f64>, tol: f64) -> bool {
    let d0 = disk_radius(w);
    neighbour_centres()
        .iter()
        .all(|&c| d0 <= disk_distance(w, c) + tol)
}

/// Greedy reduction: returns `(γ·g, γ)` with the base point of `γ·g` in
/// the closed octagon.
pub fn reduce_with_word(g: &Matrix2<f64>) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let det = g.determinant();
    if (det - 1.0).abs() > 1e-8 || !det.is_finite() {
        return Err(CharflowError::NotUnimodular(det));
    }
    let mut h = *g;
    let mut gamma = Matrix2::identity();
    for _ in 0..=REDUCTION_CAP {
        let w = to_disk(base_point(&h));
        let d0 = disk_radius(w);
        let (k, dk) = neighbour_centres()
            .iter()
            .enumerate()
            .map(|(k, &c)| (k, disk_distance(w, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("eight generators");
        if dk >= d0 - 1e-12 {
            return Ok((h, gamma));
        }
        let t_inv = inverse_unimodular(&generators()[k]);
        h = t_inv * h;
        gamma = t_inv * gamma;
    }
    Err(CharflowError::ReductionCap(REDUCTION_CAP))
}

/// `γ·g` with `γ` in the Bolza group and the base point in the octagon.
pub fn reduce_to_fundamental_domain(g: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    reduce_with_word(g).map(|(h, _)| h)
}

/// `g = [[√y, x/√y], [0, 1/√y]] · rot(t/2)`.
pub fn from_iwasawa(x: f64, y: f64, t: f64) -> Matrix2<f64> {
    let sy = y.sqrt();
    let (s, c) = (0.5 * t).sin_cos();
    Matrix2::new(sy, x / sy, 0.0, 1.0 / sy) * Matrix2::new(c, -s, s, c)
}

/// Inverse of [`from_iwasawa`] with `t ∈ [0, 2π)`; `g` and `−g` agree.
pub fn to_iwasawa(g: &Matrix2<f64>) -> (f64, f64, f64) {
    let (a, b, c, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    let n = c * c + d * d;
    let t = (2.0 * c.atan2(d)).rem_euclid(2.0 * PI);
    ((a * c + b * d) / n, 1.0 / n, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_unimodular_and_paired() {
        let g = generators();
        for k in 0..8 {
            assert!((g[k].determinant() - 1.0).abs() < 1e-12);
            let prod = g[k] * g[(k + 4) % 8];
            assert!((prod - Matrix2::identity()).norm() < 1e-10, "{k}: {prod}");
        }
    }

    #[test]
    fn generator_moves_centre_across_side() {
        let c = neighbour_centres();
        for k in 0..8 {
            assert!((disk_radius(c[k]) - 2.0 * inradius()).abs() < 1e-10);
            let d = (c[k].arg() - side_angle(k) + PI).rem_euclid(2.0 * PI) - PI;
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn vertex_is_on_the_boundary() {
        let r = circumradius();
        for k in 0..8 {
            let w = Complex::from_polar((r / 2.0).tanh(), vertex_angle(k));
            assert!(octagon_contains(w, 1e-9));
            let out = Complex::from_polar((r / 2.0 + 0.01).tanh(), vertex_angle(k));
            assert!(!octagon_contains(out, 0.0));
        }
    }

    #[test]
    fn identity_and_interior_are_fixed() {
        let id = Matrix2::identity();
        assert!((reduce_to_fundamental_domain(&id).unwrap() - id).norm() < 1e-15);
        let g = from_iwasawa(0.2, 1.3, 0.7);
        assert!((reduce_to_fundamental_domain(&g).unwrap() - g).norm() < 1e-15);
    }

    #[test]
    fn generator_times_interior_reduces_back() {
        let h = from_iwasawa(-0.1, 0.8, 2.0);
        for k in 0..8 {
            let r = reduce_to_fundamental_domain(&(generators()[k] * h)).unwrap();
            assert!((r - h).norm() < 1e-9 || (r + h).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_unimodular() {
        let g = Matrix2::new(2.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            reduce_to_fundamental_domain(&g),
            Err(CharflowError::NotUnimodular(_))
        ));
    }

    #[test]
    fn iwasawa_round_trip() {
        let (x, y, t) = (0.3, 0.4, 5.5);
        let (a, b, c) = to_iwasawa(&from_iwasawa(x, y, t));
        assert!((a - x).abs() < 1e-14 && (b - y).abs() < 1e-14 && (c - t).abs() < 1e-14);
        let (_, _, c2) = to_iwasawa(&(-from_iwasawa(x, y, t)));
        assert!((c2 - t).abs() < 1e-12);
    }
}
