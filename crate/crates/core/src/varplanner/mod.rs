//! Variational planning of the flat output.
//!
//! A strategy becomes a quadratic cost on the flat-output derivatives of order
//! 1..=6; its Euler-Lagrange equation is a 12th-order linear ODE with constant
//! coefficients whose exponential-polynomial solutions are fitted to the twelve
//! boundary conditions.

pub mod basis;
pub mod cost;
pub mod law;
pub mod roots;

pub use basis::{build_basis, Basis, BasisTerm, Part, RootCluster, CLUSTER_REACH};
pub use cost::{cost_from_strategy, ele_ode, OdeCoefficients, QuadraticCost, StrategyKind, StrategySpec};
pub use law::{
    boundary_residual, cost_value, eval_motion_law, integrate_cost, plan, plan_for_cost,
    solve_motion_law, MotionLaw, COST_QUADRATURE_POINTS, MAX_CONDITION,
};
pub use roots::{characteristic_roots, Root, RootSet};
