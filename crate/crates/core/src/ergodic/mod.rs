//! Birkhoff averages, unique-ergodicity diagnostics and structure currents.

mod birkhoff;
mod currents;

pub use birkhoff::{
    birkhoff_average, birkhoff_averages, default_scheme, observable_battery, space_average, ue_diagnostic,
    verdict_from, DiagnosticOptions, DiagnosticReport, Observable, Thresholds, Verdict,
};
pub use currents::{
    current_action, current_pairing, measure_mass, random_basis_functions, structure_boundary_residual,
    volume_measure, BoundaryResidual, CurrentAction, MeasureSpec, OrbitNormalization, Pairing,
};
