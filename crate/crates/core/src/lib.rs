//! Optimal planning of the flat output of underactuated, differentially flat
//! serial robots.
//!
//! The pipeline is:
//!
//! 1. [`varplanner`] turns a planning strategy into a quadratic cost on the
//!    derivatives of the flat output, derives the Euler-Lagrange ODE, and solves
//!    the 12-condition boundary-value problem for an analytic [`MotionLaw`].
//! 2. [`flatmodel`] maps the flat output to joint motion and feed-forward torque.
//! 3. [`dynsim`] integrates the 2-DOF spring/damper robot under that torque.
//! 4. [`metrics`] reports torque RMS and the residual oscillation amplitude.
//! 5. [`scenario`] wires the stages together and reproduces the reference
//!    results table.

pub mod dynsim;
pub mod error;
pub mod flatmodel;
pub mod metrics;
pub mod scenario;
pub mod varplanner;

pub use dynsim::{simulate, SimConfig, Trajectory};
pub use error::{Error, Result};
pub use flatmodel::{
    FlatBoundaryConditions, FlatSample, JointState, ReducedFlatParams, SystemMatrices2DOF,
};
pub use metrics::ScenarioMetrics;
pub use scenario::{run_scenario, ScenarioConfig, ScenarioReport};
pub use varplanner::{MotionLaw, QuadraticCost, StrategyKind, StrategySpec};
