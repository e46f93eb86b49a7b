//! Background-covariant tensor calculus: metrics, connections, curvature, `∇̃` and `g̃`-norms.

mod background;
pub mod jets;
mod ops;

pub use background::{BackgroundGeometry, CurvatureBounds, Frame};
pub use jets::MetricJet;
pub use ops::{
    background_norm, christoffel, christoffel_difference, contraction_norms, covariant_derivative,
    covariant_derivative_evolving, deturck_vector, metric_jets, relative_eigenvalues, relative_eigenvalues_between,
    ricci, riemann, scalar_curvature, star_bound_check,
};
