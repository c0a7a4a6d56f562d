//! Pointwise exterior algebra, differential forms as fields, and quadrature.

mod algebra;
mod field;
mod quadrature;

pub use algebra::{component_count, index_sets, Covector, MAX_DIM};
pub use field::{
    exterior_derivative, exterior_derivative_eval, fd_exterior_derivative,
    fd_exterior_derivative_extrapolated, wedge_eval, FormField, ScalarFunction, FD_STEP,
};
pub use quadrature::{
    axis_nodes, gauss_legendre, halton, integrate_density, integrate_top_form, AxisRule,
    DensitySample, IntegralEstimate, Scheme,
};
