//! Robot parameters, 2-DOF system matrices, and the flatness maps.
//!
//! The robot has one actuated joint followed by a fully balanced passive joint
//! carrying a torsional spring `k` and viscous damper `c`. Its flat output is
//! the absolute orientation of the last link, `y1 = q1 + q2`, and everything
//! else (passive deflection, actuated angle, motor torque) is an algebraic
//! function of `y1` and its derivatives.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four scalars that drive every flatness relation.
///
/// For an n-DOF chain these are `(I*_{n-1}, I*_n, k_n, c_n)`; for the 2-DOF
/// robot they bind to `(I*_1, I*_2, k_2, c_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedFlatParams {
    /// Generalized inertia of the last actuated joint (kg m^2).
    pub i_star_prev: f64,
    /// Generalized inertia of the passive joint (kg m^2).
    pub i_star_last: f64,
    /// Passive joint stiffness (N m / rad).
    pub stiffness: f64,
    /// Passive joint damping (N m s / rad).
    pub damping: f64,
}

impl ReducedFlatParams {
    pub fn new(i_star_prev: f64, i_star_last: f64, stiffness: f64, damping: f64) -> Result<Self> {
        let params = Self {
            i_star_prev,
            i_star_last,
            stiffness,
            damping,
        };
        params.validate()?;
        Ok(params)
    }

    /// 2-DOF robot dataset used throughout the reference scenarios.
    pub fn reference_robot() -> Self {
        Self {
            i_star_prev: 6.4e-4,
            i_star_last: 3.3e-5,
            stiffness: 3e-3,
            damping: 2e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("i_star_prev", self.i_star_prev),
            ("i_star_last", self.i_star_last),
            ("stiffness", self.stiffness),
            ("damping", self.damping),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        if self.i_star_last <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "i_star_last must be positive, got {}",
                self.i_star_last
            )));
        }
        if self.i_star_prev <= self.i_star_last {
            return Err(Error::InvalidParams(format!(
                "mass matrix is not positive-definite: i_star_prev ({}) must exceed i_star_last ({})",
                self.i_star_prev, self.i_star_last
            )));
        }
        if self.stiffness <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "stiffness must be positive, got {}",
                self.stiffness
            )));
        }
        if self.damping < 0.0 {
            return Err(Error::InvalidParams(format!(
                "damping must be non-negative, got {}",
                self.damping
            )));
        }
        Ok(())
    }

    /// Same robot with the passive joint's stiffness and damping scaled.
    pub fn with_joint_scales(&self, k_scale: f64, c_scale: f64) -> Self {
        Self {
            stiffness: self.stiffness * k_scale,
            damping: self.damping * c_scale,
            ..*self
        }
    }

    /// Gains of the feed-forward torque on `(y1'', y1'''', y1''''')`.
    ///
    /// `tau = a*y1'' + b*y1'''' - e*y1'''''`, returned as `[a, b, e]`.
    pub fn torque_gains(&self) -> [f64; 3] {
        let coupling = self.i_star_last * (self.i_star_prev - self.i_star_last);
        let b = coupling / self.stiffness;
        let e = coupling * self.damping / (self.stiffness * self.stiffness);
        [self.i_star_prev, b, e]
    }

    /// Gains of the passive deflection on `(y1'', y1''')`, as `[-I*/k, I* c / k^2]`.
    fn passive_gains(&self) -> [f64; 2] {
        let k = self.stiffness;
        [
            -self.i_star_last / k,
            self.i_star_last * self.damping / (k * k),
        ]
    }
}

/// Mass, damping and stiffness matrices of the 2-DOF robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemMatrices2DOF {
    pub mass: Matrix2<f64>,
    pub damping: Matrix2<f64>,
    pub stiffness: Matrix2<f64>,
}

impl SystemMatrices2DOF {
    /// `M q'' + C q' + K q`, i.e. the joint torques that produce the given motion.
    pub fn generalized_forces(
        &self,
        q: Vector2<f64>,
        q_dot: Vector2<f64>,
        q_ddot: Vector2<f64>,
    ) -> Vector2<f64> {
        self.mass * q_ddot + self.damping * q_dot + self.stiffness * q
    }
}

pub fn assemble_matrices(params: &ReducedFlatParams) -> Result<SystemMatrices2DOF> {
    params.validate()?;
    let (i1, i2) = (params.i_star_prev, params.i_star_last);
    Ok(SystemMatrices2DOF {
        mass: Matrix2::new(i1, i2, i2, i2),
        damping: Matrix2::new(0.0, 0.0, 0.0, params.damping),
        stiffness: Matrix2::new(0.0, 0.0, 0.0, params.stiffness),
    })
}

/// Value of the flat output and its time derivatives of order 0..=6.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatSample {
    pub d: [f64; 7],
}

impl FlatSample {
    pub fn new(d: [f64; 7]) -> Self {
        Self { d }
    }

    /// A sample with a single non-zero derivative.
    pub fn unit(order: usize, value: f64) -> Self {
        let mut d = [0.0; 7];
        d[order] = value;
        Self { d }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            d: self.d.map(|v| v * factor),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for FlatSample {
    type Output = f64;

    fn index(&self, order: usize) -> &f64 {
        &self.d[order]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub q1: f64,
    pub q2: f64,
    pub q1_dot: f64,
    pub q2_dot: f64,
}

impl JointState {
    pub fn positions(&self) -> Vector2<f64> {
        Vector2::new(self.q1, self.q2)
    }

    pub fn velocities(&self) -> Vector2<f64> {
        Vector2::new(self.q1_dot, self.q2_dot)
    }

    pub fn is_finite(&self) -> bool {
        [self.q1, self.q2, self.q1_dot, self.q2_dot]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Passive joint deflection, rate and acceleration: `(q2, q2', q2'')`.
///
/// `q2 = -(I*/k) y1'' + (I* c / k^2) y1'''`; the rate and acceleration are
/// its exact time derivatives.
pub fn passive_joint_from_flat(params: &ReducedFlatParams, s: &FlatSample) -> (f64, f64, f64) {
    let [g2, g3] = params.passive_gains();
    (
        g2 * s[2] + g3 * s[3],
        g2 * s[3] + g3 * s[4],
        g2 * s[4] + g3 * s[5],
    )
}

/// Actuated joint angle and rate `(q1, q1')`, from `y1 = q1 + q2`.
pub fn actuated_joint_from_flat(params: &ReducedFlatParams, s: &FlatSample) -> (f64, f64) {
    let (q2, q2_dot, _) = passive_joint_from_flat(params, s);
    (s[0] - q2, s[1] - q2_dot)
}

/// Full planned joint state reconstructed from the flat output.
pub fn joint_state_from_flat(params: &ReducedFlatParams, s: &FlatSample) -> JointState {
    let (q2, q2_dot, _) = passive_joint_from_flat(params, s);
    JointState {
        q1: s[0] - q2,
        q2,
        q1_dot: s[1] - q2_dot,
        q2_dot,
    }
}

/// Feed-forward torque of the last actuated joint.
///
/// Exact inverse dynamics when the passive joint is undamped; a first-order
/// approximation in `c` otherwise.
pub fn feedforward_torque(params: &ReducedFlatParams, s: &FlatSample) -> f64 {
    let [a, b, e] = params.torque_gains();
    a * s[2] + b * s[4] - e * s[5]
}

/// Twelve boundary conditions on the flat output: value and derivatives of
/// order 1..=5 at each end of the motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatBoundaryConditions {
    pub t_start: f64,
    pub t_end: f64,
    /// `y1^(m)(t_start)` for `m = 0..=5`.
    pub start: [f64; 6],
    /// `y1^(m)(t_end)` for `m = 0..=5`.
    pub end: [f64; 6],
}

impl FlatBoundaryConditions {
    pub fn rest_to_rest(t_start: f64, t_end: f64, y_start: f64, y_end: f64) -> Result<Self> {
        let mut start = [0.0; 6];
        let mut end = [0.0; 6];
        start[0] = y_start;
        end[0] = y_end;
        let bc = Self {
            t_start,
            t_end,
            start,
            end,
        };
        bc.validate()?;
        Ok(bc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(Error::InvalidBoundary("times must be finite".into()));
        }
        if self.t_end <= self.t_start {
            return Err(Error::InvalidBoundary(format!(
                "t_end ({}) must be greater than t_start ({})",
                self.t_end, self.t_start
            )));
        }
        if !self.start.iter().chain(&self.end).all(|v| v.is_finite()) {
            return Err(Error::InvalidBoundary("boundary values must be finite".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn y_start(&self) -> f64 {
        self.start[0]
    }

    pub fn y_end(&self) -> f64 {
        self.end[0]
    }

    /// All twelve conditions in solve order: start orders 0..=5, then end orders 0..=5.
    pub fn values(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[..6].copy_from_slice(&self.start);
        out[6..].copy_from_slice(&self.end);
        out
    }

    pub fn is_rest_to_rest(&self) -> bool {
        self.start[1..].iter().chain(&self.end[1..]).all(|&v| v == 0.0)
    }
}

/// Rest-to-rest flat-output boundaries for a joint-space point-to-point move.
pub fn flat_boundaries_from_joint(
    q1_i: f64,
    q2_i: f64,
    q1_f: f64,
    q2_f: f64,
    t_i: f64,
    t_f: f64,
) -> Result<FlatBoundaryConditions> {
    FlatBoundaryConditions::rest_to_rest(t_i, t_f, q1_i + q2_i, q1_f + q2_f)
}
