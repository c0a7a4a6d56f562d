//! Truncated smooth function bases on charts.

use crate::forms::ScalarFunction;
use crate::Vector;

/// Wave vectors `k ≠ 0` with `|k|₁ ≤ cap`, one per `±k` pair.
fn half_lattice(dim: usize, cap: usize) -> Vec<[i32; 3]> {
    let c = cap as i32;
    let mut out = Vec::new();
    for a in -c..=c {
        for b in -c..=c {
            for d in -c..=c {
                let k = [a, b, d];
                if k[dim..].iter().any(|&v| v != 0) {
                    continue;
                }
                if k.iter().map(|v| v.abs()).sum::<i32>() > c {
                    continue;
                }
                // first nonzero entry positive
                match k.iter().find(|&&v| v != 0) {
                    Some(&v) if v > 0 => out.push(k),
                    _ => {}
                }
            }
        }
    }
    out
}

/// `cos(k·x)` and `sin(k·x)` for all wave vectors of total degree ≤ `cap`
/// on a periodic box of side 2π.
pub fn trig_basis(dim: usize, cap: usize) -> Vec<ScalarFunction> {
    let mut out = Vec::new();
    for k in half_lattice(dim, cap) {
        let kv = Vector::new(k[0] as f64, k[1] as f64, k[2] as f64, 0.0);
        let name = format!("{},{},{}", k[0], k[1], k[2]);
        out.push(
            ScalarFunction::new(format!("cos({name})"), dim, move |p| kv.dot(p).cos())
                .with_gradient(move |p| kv * -kv.dot(p).sin()),
        );
        out.push(
            ScalarFunction::new(format!("sin({name})"), dim, move |p| kv.dot(p).sin())
                .with_gradient(move |p| kv * kv.dot(p).cos()),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_basis_sizes() {
        assert_eq!(trig_basis(3, 1).len(), 6);
        assert_eq!(trig_basis(3, 3).len(), 62);
        assert_eq!(trig_basis(2, 1).len(), 4);
    }

    #[test]
    fn gradients_match_differences() {
        let p = Vector::new(0.3, -1.1, 2.0, 0.0);
        for f in trig_basis(3, 2) {
            let g = f.gradient(&p);
            for i in 0..3 {
                let mut a = p;
                let mut b = p;
                a[i] += 1e-6;
                b[i] -= 1e-6;
                let fd = (f.value(&a) - f.value(&b)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-8, "{}", f.label());
            }
        }
    }
}
