//! Shared fixtures for the benchmarks.

use charflow::models::{build_hyperbolic_utb, build_levelset, build_t3_contact, LevelSetSpec};
use charflow::Model;

pub fn torus() -> Model {
    build_t3_contact().expect("torus builds")
}

pub fn sphere() -> Model {
    build_levelset(LevelSetSpec::sphere()).expect("sphere builds")
}

pub fn hyperbolic(epsilon: f64) -> Model {
    build_hyperbolic_utb(epsilon).expect("hyperbolic model builds")
}
