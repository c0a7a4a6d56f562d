use std::f64::consts::PI;

use charflow::dynamics::{
    closed_orbit_through, find_periodic_orbits, orbit_action, OrbitSearchOptions, Parametrization, SectionSpec,
};
use charflow::forms::ScalarFunction;
use charflow::models::{
    build_hyperbolic_utb, build_levelset, build_magnetic_torus, build_t3_contact, LevelSetSpec, MagneticSpec,
};
use charflow::{Point, Vector, GOLDEN_RATIO};

fn ellipsoid_section() -> SectionSpec {
    SectionSpec::new(Point::zeros(), Vector::new(0.0, 1.0, 0.0, 1.0))
}

#[test]
fn ellipsoid_has_two_orbits_with_capacity_actions() {
    let m = build_levelset(LevelSetSpec::ellipsoid(1.0, GOLDEN_RATIO)).unwrap();
    let opts = OrbitSearchOptions {
        seeds: 24,
        max_period: 6.0,
        ..Default::default()
    };
    let orbits = find_periodic_orbits(&m, &ellipsoid_section(), &opts).unwrap();
    let mut actions: Vec<f64> = orbits.iter().map(|o| o.action).collect();
    actions.sort_by(f64::total_cmp);
    println!("{orbits:#?}");
    assert_eq!(orbits.len(), 2);
    assert!((actions[0] - 1.0).abs() < 1e-6);
    assert!((actions[1] - GOLDEN_RATIO).abs() < 1e-6);
    for o in &orbits {
        assert!(o.residual < opts.tol);
        assert!(o.contractible);
        // Hamiltonian periods equal the capacities
        assert!((o.hamiltonian_period() - o.action).abs() < 1e-6);
        let shifted = m
            .with_shifted_primitive(&ScalarFunction::new("sin x sin y", 4, |p| p[0].sin() * p[1].sin()))
            .unwrap();
        let a = orbit_action(&shifted, o, Parametrization::CharacteristicField).unwrap();
        assert!((a - o.action).abs() < 1e-8);
    }
}

#[test]
fn torus_rational_family_collapses() {
    let m = build_t3_contact().unwrap();
    let section = SectionSpec::new(Point::new(0.0, 0.0, PI / 4.0, 0.0), Vector::new(1.0, 0.0, 0.0, 0.0)).with_frozen(&[2]);
    // X has negative x-component, so crossings of x = 0 are decreasing
    let section = SectionSpec { direction: -1, ..section };
    let opts = OrbitSearchOptions {
        seeds: 8,
        max_period: 10.0,
        ..Default::default()
    };
    let orbits = find_periodic_orbits(&m, &section, &opts).unwrap();
    assert_eq!(orbits.len(), 1, "{orbits:#?}");
    assert!(orbits[0].multiplicity > 1);
    assert!((orbits[0].period - 2.0 * PI * 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn torus_irrational_slope_has_no_orbits() {
    let m = build_t3_contact().unwrap();
    let section = SectionSpec::new(Point::new(0.0, 0.0, 0.3, 0.0), Vector::new(1.0, 0.0, 0.0, 0.0)).with_frozen(&[2]);
    let section = SectionSpec { direction: -1, ..section };
    let opts = OrbitSearchOptions {
        seeds: 8,
        max_period: 30.0,
        ..Default::default()
    };
    assert!(find_periodic_orbits(&m, &section, &opts).unwrap().is_empty());
}

#[test]
fn magnetic_cyclotron_orbit() {
    let m = build_magnetic_torus(MagneticSpec::sin_x(0.05)).unwrap();
    let section = SectionSpec::new(Point::zeros(), Vector::new(0.0, 0.0, 1.0, 0.0));
    let opts = OrbitSearchOptions {
        seeds: 16,
        max_period: 4.0 * PI,
        ..Default::default()
    };
    let orbits = find_periodic_orbits(&m, &section, &opts).unwrap();
    println!("{orbits:#?}");
    assert!(orbits.iter().any(|o| (o.period - 2.0 * PI).abs() < 0.2 * PI));
}

#[test]
fn hyperbolic_elliptic_orbits_share_period() {
    let e = 0.5;
    let m = build_hyperbolic_utb(e).unwrap();
    let want = 2.0 * PI / (1.0f64 - e * e).sqrt();
    for (i, u) in [[0.1, 0.2, 0.3], [0.6, 0.9, 0.1], [0.33, 0.5, 0.8], [0.9, 0.99, 0.5]].iter().enumerate() {
        let (p, _) = m.map_unit_cube(*u);
        let o = closed_orbit_through(&m, &p, 2.0 * want, 1e-7, Parametrization::CharacteristicField)
            .unwrap()
            .unwrap_or_else(|| panic!("orbit {i} did not close"));
        assert!((o.period - want).abs() < 1e-6 * want, "{} vs {want}", o.period);
        assert!(!o.contractible);
    }
}
