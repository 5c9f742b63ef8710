//! Chart-level tensor calculus by central differences.

mod chart;
mod field;
mod ops;

pub use chart::{Chart, Interval};
pub use field::{GradFn, MatrixFn, MetricChart, ScalarField, ValueFn, VectorField, MAX_METRIC_CONDITION};
pub use ops::{
    christoffel, curvature, hess_scalar, jacobian, laplacian, lie_derivative_metric,
    metric_derivatives, vector_bracket, Christoffel, CurvatureReport, DEFAULT_STEP,
};
