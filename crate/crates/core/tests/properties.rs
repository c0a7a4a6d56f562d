use proptest::prelude::*;

use charflow::dynamics::{flow_map, Parametrization};
use charflow::ergodic::{current_action, MeasureSpec};
use charflow::forms::{fd_exterior_derivative_extrapolated, exterior_derivative, Covector, FormField, FD_STEP};
use charflow::models::bolza::{base_point, disk_radius, from_iwasawa, octagon_contains, to_disk};
use charflow::models::{build_magnetic_torus, build_t3_contact, reduce_to_fundamental_domain, MagneticSpec};
use charflow::{Model, Point, ScalarFunction, Scheme, Vector};

fn vec3() -> impl Strategy<Value = Vector> {
    prop::array::uniform3(-2.0..2.0f64).prop_map(|a| Vector::new(a[0], a[1], a[2], 0.0))
}

fn two_form() -> impl Strategy<Value = Covector> {
    prop::array::uniform3(-2.0..2.0f64).prop_map(|c| Covector::from_components(3, 2, &c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_forms_alternate(w in two_form(), u in vec3(), v in vec3()) {
        let a = w.eval(&[u, v]).unwrap();
        let b = w.eval(&[v, u]).unwrap();
        prop_assert!((a + b).abs() < 1e-12);
        prop_assert!(w.eval(&[u, u]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn evaluation_is_linear(w in two_form(), u in vec3(), v in vec3(), x in vec3(), s in -3.0..3.0f64) {
        let lhs = w.eval(&[u * s + x, v]).unwrap();
        let rhs = s * w.eval(&[u, v]).unwrap() + w.eval(&[x, v]).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn wedge_of_one_forms_is_determinant(a in vec3(), b in vec3(), u in vec3(), v in vec3()) {
        let alpha = Covector::one_form(3, &[a[0], a[1], a[2]]);
        let beta = Covector::one_form(3, &[b[0], b[1], b[2]]);
        let w = alpha.wedge(&beta).unwrap().eval(&[u, v]).unwrap();
        let det = a.dot(&u) * b.dot(&v) - a.dot(&v) * b.dot(&u);
        prop_assert!((w - det).abs() < 1e-10 * (1.0 + det.abs()));
    }

    #[test]
    fn d_squared_vanishes(k in prop::array::uniform3(-2i32..=2), c in -1.0..1.0f64, p in prop::array::uniform3(-3.0..3.0f64)) {
        let f = ScalarFunction::new("trig", 3, move |q| {
            c * (k[0] as f64 * q[0] + k[1] as f64 * q[1] + k[2] as f64 * q[2]).sin() * q[0].cos()
        });
        // numerical d of a one-form that is not closed, then d again
        let beta = FormField::new("f dy", 3, 1, move |q| Covector::one_form(3, &[0.0, f.value(q), 0.0])).unwrap();
        let d_beta = exterior_derivative(&beta, FD_STEP).unwrap();
        let dd = fd_exterior_derivative_extrapolated(&d_beta, &Point::new(p[0], p[1], p[2], 0.0), 4.0 * FD_STEP).unwrap();
        prop_assert!(dd.max_abs() < 1e-4, "{:?}", dd.components());
    }
}

/// `μ(φ_t(p)) · det Dφ_t(p) / μ(p)`, by central differences in the chart.
fn volume_ratio(model: &Model, p: &Point, t: f64) -> f64 {
    let h = 1e-5;
    let center = flow_map(model, p, t, 1e-11, Parametrization::CharacteristicField).unwrap();
    let mut cols = nalgebra::Matrix3::zeros();
    for i in 0..3 {
        let mut e = Vector::zeros();
        e[i] = h;
        let a = flow_map(model, &(p + e), t, 1e-11, Parametrization::CharacteristicField).unwrap();
        let b = flow_map(model, &(p - e), t, 1e-11, Parametrization::CharacteristicField).unwrap();
        let d = model.displacement(&b, &a) / (2.0 * h);
        for j in 0..3 {
            cols[(j, i)] = d[j];
        }
    }
    let frame = model.frame(p);
    model.mu_density(&center, &model.frame(&center)) * cols.determinant() / model.mu_density(p, &frame)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flows_preserve_mu(p in prop::array::uniform3(0.0..6.28f64), t in 0.1..3.0f64) {
        let p = Point::new(p[0], p[1], p[2], 0.0);
        for m in [build_t3_contact().unwrap(), build_magnetic_torus(MagneticSpec::sin_x(0.3)).unwrap()] {
            let r = volume_ratio(&m, &p, t);
            prop_assert!((r - 1.0).abs() < 1e-4, "{} ratio {r}", m.name);
        }
    }

    #[test]
    fn current_action_ignores_volume_rescaling(a in -0.8..0.8f64, kx in 0i32..3, ky in 0i32..3, phase in 0.0..6.28f64) {
        let m = build_t3_contact().unwrap();
        let nu = MeasureSpec::volume(Scheme::Grid { resolution: 16 });
        let base = current_action(&m, &nu).unwrap();
        let g = ScalarFunction::new("g", 3, move |p| a * (kx as f64 * p[0] + ky as f64 * p[1] + p[2] + phase).sin());
        let scaled = current_action(&m.with_scaled_volume(g), &nu).unwrap();
        prop_assert!((scaled.value - base.value).abs() < 1e-8 * base.value.abs() + 3.0 * base.error.hypot(scaled.error),
            "{} vs {}", scaled.value, base.value);
    }

    #[test]
    fn bolza_reduction_moves_towards_centre(x in -3.0..3.0f64, ly in -2.5..2.5f64, t in 0.0..6.28f64) {
        let g = from_iwasawa(x, ly.exp(), t);
        let before = disk_radius(to_disk(base_point(&g)));
        let h = reduce_to_fundamental_domain(&g).unwrap();
        let w = to_disk(base_point(&h));
        prop_assert!(disk_radius(w) <= before + 1e-9);
        prop_assert!(octagon_contains(w, 1e-9));
        prop_assert!((h.determinant() - 1.0).abs() < 1e-9);
    }
}
