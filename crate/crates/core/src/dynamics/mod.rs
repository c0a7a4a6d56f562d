//! Characteristic vector field, trajectory integration and closed
//! characteristics.

mod field;
mod integrator;
mod orbits;

pub use field::{characteristic_field, flow_vector, speed_factor, Parametrization};
pub use integrator::{
    flow_map, integrate_characteristic, integrate_with_options, IntegratorOptions, IntegratorStats, Trajectory,
    TrajectorySample,
};
pub use orbits::{
    closed_orbit_through, deduplicate, find_periodic_orbits, orbit_action, resample_loop, OrbitRecord,
    OrbitSearchOptions, SectionSpec,
};

pub(crate) use integrator::Run;
pub(crate) use orbits::orbit_integral;
