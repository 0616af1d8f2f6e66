//! Closed-form and brute-force reference solutions.
//!
//! These are independent of the conic solver and serve as ground truth in
//! tests: the ordered case, centred Gaussians, two-point measures in the
//! plane, and an LP with the middle point restricted to a grid.

mod gaussian;
mod grid;
mod ordered;
mod two_point;

pub use gaussian::{gaussian_oracle, quantize_gaussian, CovPredicates, CovSplit, GaussianSolution};
pub use grid::{grid_oracle, GridSolution, GridSpec, DEFAULT_GRID_COLUMNS, DEFAULT_GRID_DIVISIONS};
pub use ordered::{ordered_oracle, OrderedSolution};
pub use two_point::{
    case_a_alternative_gamma, case_a_formulas, case_b_formulas, case_b_potential, detect_case, lambda_pm, right_angle_instance, two_point_oracle,
    Branch, QuadraticPotential, RadialPotential, Relabel, TwoPointCase, TwoPointPotential, TwoPointSolution,
};
