//! Fixed-step simulation of the 2-DOF robot under a feed-forward torque.
//!
//! The plant is `M q'' + C q' + K q = [tau(t), 0]^T`, integrated with the
//! classical 4th-order Runge-Kutta scheme over the motion interval followed by
//! a free-response phase with zero torque.

use nalgebra::{Matrix2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatmodel::{assemble_matrices, JointState, ReducedFlatParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Nominal integration step (s). The motion interval is split into a whole
    /// number of steps, so the step actually used may differ slightly.
    pub dt: f64,
    /// Free-response duration after the end of the motion (s).
    pub t_free: f64,
    /// Multiplier on the simulated plant's passive stiffness.
    pub k_scale: f64,
    /// Multiplier on the simulated plant's passive damping.
    pub c_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_free: 1.0,
            k_scale: 1.0,
            c_scale: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSimConfig(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_free.is_finite() && self.t_free >= 0.0) {
            return bad(format!("t_free must be non-negative, got {}", self.t_free));
        }
        if !(self.k_scale.is_finite() && self.k_scale > 0.0) {
            return bad(format!("k_scale must be positive, got {}", self.k_scale));
        }
        if !(self.c_scale.is_finite() && self.c_scale >= 0.0) {
            return bad(format!("c_scale must be non-negative, got {}", self.c_scale));
        }
        Ok(())
    }
}

/// Uniformly sampled simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<JointState>,
    /// Torque applied on the actuated joint at each sample.
    pub torque: Vec<f64>,
    /// Index of the sample at the end of the motion.
    pub end_index: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn end_state(&self) -> JointState {
        self.states[self.end_index]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.end_index]
    }
}

struct Plant {
    mass_inv: Matrix2<f64>,
    damping: Matrix2<f64>,
    stiffness: Matrix2<f64>,
}

impl Plant {
    fn derivative(&self, x: &Vector4<f64>, tau: f64) -> Vector4<f64> {
        let q = Vector2::new(x[0], x[1]);
        let qd = Vector2::new(x[2], x[3]);
        let qdd = self.mass_inv * (Vector2::new(tau, 0.0) - self.damping * qd - self.stiffness * q);
        Vector4::new(qd[0], qd[1], qdd[0], qdd[1])
    }
}

fn to_state(x: &Vector4<f64>) -> JointState {
    JointState {
        q1: x[0],
        q2: x[1],
        q1_dot: x[2],
        q2_dot: x[3],
    }
}

/// Integrates the robot from `initial` at `t_start` through `t_end + t_free`.
///
/// `torque` is evaluated at every Runge-Kutta stage during the motion and
/// replaced by zero afterwards. The plant uses the passive stiffness and
/// damping scaled by `config.k_scale` and `config.c_scale`.
pub fn simulate<F>(
    params: &ReducedFlatParams,
    torque: F,
    initial: JointState,
    horizon: (f64, f64),
    config: &SimConfig,
) -> Result<Trajectory>
where
    F: Fn(f64) -> f64,
{
    config.validate()?;
    let (t_start, t_end) = horizon;
    if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
        return Err(Error::InvalidSimConfig(format!(
            "invalid horizon [{t_start}, {t_end}]"
        )));
    }
    if !initial.is_finite() {
        return Err(Error::InvalidSimConfig("initial state is not finite".into()));
    }

    let plant_params = params.with_joint_scales(config.k_scale, config.c_scale);
    let m = assemble_matrices(&plant_params)?;
    let mass_inv = m
        .mass
        .try_inverse()
        .ok_or_else(|| Error::InvalidParams("mass matrix is singular".into()))?;
    let plant = Plant {
        mass_inv,
        damping: m.damping,
        stiffness: m.stiffness,
    };

    let motion_steps = ((t_end - t_start) / config.dt).round().max(1.0) as usize;
    let h = (t_end - t_start) / motion_steps as f64;
    let free_steps = (config.t_free / h).round() as usize;
    let total = motion_steps + free_steps;

    let time_at = |i: usize| {
        if i == motion_steps {
            t_end
        } else {
            t_start + h * i as f64
        }
    };
    let applied = |step: usize, t: f64| if step < motion_steps { torque(t) } else { 0.0 };

    let mut times = Vec::with_capacity(total + 1);
    let mut states = Vec::with_capacity(total + 1);
    let mut torques = Vec::with_capacity(total + 1);

    let mut x = Vector4::new(initial.q1, initial.q2, initial.q1_dot, initial.q2_dot);
    times.push(t_start);
    states.push(initial);
    torques.push(applied(0, t_start));

    for step in 0..total {
        let t = time_at(step);
        let t_next = time_at(step + 1);
        let dt = t_next - t;
        let t_mid = t + 0.5 * dt;

        let tau0 = applied(step, t);
        let tau_mid = applied(step, t_mid);
        let tau1 = applied(step, t_next);

        let k1 = plant.derivative(&x, tau0);
        let k2 = plant.derivative(&(x + k1 * (0.5 * dt)), tau_mid);
        let k3 = plant.derivative(&(x + k2 * (0.5 * dt)), tau_mid);
        let k4 = plant.derivative(&(x + k3 * dt), tau1);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable { time: t_next });
        }
        times.push(t_next);
        states.push(to_state(&x));
        torques.push(if step < motion_steps { torque(t_next) } else { 0.0 });
    }

    Ok(Trajectory {
        times,
        states,
        torque: torques,
        end_index: motion_steps,
    })
}

/// Largest absolute deviation `(q1, q2)` between a planned joint series and a
/// simulated trajectory over the motion interval. Both must share the grid.
pub fn planned_vs_simulated(planned: &[JointState], traj: &Trajectory) -> Result<(f64, f64)> {
    if planned.len() != traj.len() {
        return Err(Error::GridMismatch(format!(
            "{} planned samples vs {} simulated",
            planned.len(),
            traj.len()
        )));
    }
    let errors = planned
        .iter()
        .zip(&traj.states)
        .take(traj.end_index + 1)
        .fold((0.0f64, 0.0f64), |(e1, e2), (p, s)| {
            (e1.max((p.q1 - s.q1).abs()), e2.max((p.q2 - s.q2).abs()))
        });
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn robot() -> ReducedFlatParams {
        ReducedFlatParams::reference_robot()
    }

    fn undamped() -> ReducedFlatParams {
        robot().with_joint_scales(1.0, 0.0)
    }

    #[test]
    fn equilibrium_stays_put() {
        let traj = simulate(&robot(), |_| 0.0, JointState::default(), (0.0, 1.0), &SimConfig::default())
            .unwrap();
        assert_eq!(traj.len(), 20_001);
        assert_eq!(traj.end_index, 10_000);
        assert!(traj.states.iter().all(|s| *s == JointState::default()));
        assert!(traj.torque.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn grid_is_uniform_and_hits_the_end() {
        let cfg = SimConfig {
            dt: 3e-3,
            t_free: 0.5,
            ..SimConfig::default()
        };
        let traj = simulate(&robot(), |_| 1e-3, JointState::default(), (0.0, 1.0), &cfg).unwrap();
        assert_eq!(traj.t_end(), 1.0);
        let h = traj.step();
        for w in traj.times.windows(2) {
            assert!((w[1] - w[0] - h).abs() < 1e-12);
        }
        assert!(traj.torque[traj.end_index + 1..].iter().all(|&t| t == 0.0));
        assert_eq!(traj.torque[traj.end_index], 1e-3);
    }

    #[test]
    fn free_oscillation_frequency() {
        // eigenanalysis of the undamped two-mass system: only one non-rigid mode
        let p = undamped();
        let (i1, i2, k) = (p.i_star_prev, p.i_star_last, p.stiffness);
        let omega = (k / (i2 * (1.0 - i2 / i1))).sqrt();
        assert!((omega - 9.79).abs() < 5e-3);

        let initial = JointState { q2: 0.01, ..JointState::default() };
        let cfg = SimConfig { t_free: 0.0, ..SimConfig::default() };
        let traj = simulate(&p, |_| 0.0, initial, (0.0, 3.0), &cfg).unwrap();
        // upward zero crossings of q2, linearly interpolated
        let crossings: Vec<f64> = traj
            .states
            .windows(2)
            .zip(traj.times.windows(2))
            .filter(|(s, _)| s[0].q2 < 0.0 && s[1].q2 >= 0.0)
            .map(|(s, t)| t[0] + (t[1] - t[0]) * s[0].q2 / (s[0].q2 - s[1].q2))
            .collect();
        assert!(crossings.len() >= 3);
        let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let measured = 2.0 * std::f64::consts::PI / period;
        assert!((measured - omega).abs() / omega < 1e-6, "{measured} vs {omega}");
    }

    #[test]
    fn undamped_free_response_conserves_energy() {
        let p = undamped();
        let m = assemble_matrices(&p).unwrap();
        let initial = JointState { q1: 0.2, q2: 0.01, q1_dot: 0.3, q2_dot: -0.05 };
        let cfg = SimConfig { t_free: 0.0, ..SimConfig::default() };
        let traj = simulate(&p, |_| 0.0, initial, (0.0, 2.0), &cfg).unwrap();
        let energy = |s: &JointState| {
            let v = s.velocities();
            0.5 * v.dot(&(m.mass * v)) + 0.5 * p.stiffness * s.q2 * s.q2
        };
        let e0 = energy(&initial);
        let drift = traj
            .states
            .iter()
            .map(|s| (energy(s) - e0).abs() / e0)
            .fold(0.0, f64::max);
        assert!(drift < 2.0 * 1e-9, "drift {drift:e}");
    }

    #[test]
    fn response_is_linear_in_torque() {
        let profile = |t: f64| 1e-3 * (3.0 * t).sin();
        let cfg = SimConfig { dt: 1e-3, t_free: 0.5, ..SimConfig::default() };
        let one = simulate(&robot(), profile, JointState::default(), (0.0, 1.0), &cfg).unwrap();
        let two = simulate(&robot(), |t| 2.0 * profile(t), JointState::default(), (0.0, 1.0), &cfg)
            .unwrap();
        for (a, b) in one.states.iter().zip(&two.states) {
            for (x, y) in [(a.q1, b.q1), (a.q2, b.q2), (a.q1_dot, b.q1_dot), (a.q2_dot, b.q2_dot)] {
                assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn perturbation_scales_the_plant() {
        let initial = JointState { q2: 0.01, ..JointState::default() };
        let nominal = SimConfig { dt: 1e-3, t_free: 0.0, ..SimConfig::default() };
        let stiffer = SimConfig { k_scale: 1.1, c_scale: 1.1, ..nominal };
        let a = simulate(&robot(), |_| 0.0, initial, (0.0, 1.0), &nominal).unwrap();
        let b = simulate(&robot(), |_| 0.0, initial, (0.0, 1.0), &stiffer).unwrap();
        assert_ne!(a.end_state(), b.end_state());
        let direct = simulate(&robot().with_joint_scales(1.1, 1.1), |_| 0.0, initial, (0.0, 1.0), &nominal)
            .unwrap();
        assert_eq!(direct.end_state(), b.end_state());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let run = |cfg: SimConfig| simulate(&robot(), |_| 0.0, JointState::default(), (0.0, 1.0), &cfg);
        assert!(run(SimConfig { dt: 0.0, ..SimConfig::default() }).is_err());
        assert!(run(SimConfig { t_free: -1.0, ..SimConfig::default() }).is_err());
        assert!(run(SimConfig { k_scale: 0.0, ..SimConfig::default() }).is_err());
        assert!(run(SimConfig { c_scale: -0.1, ..SimConfig::default() }).is_err());
        assert!(simulate(&robot(), |_| 0.0, JointState::default(), (1.0, 1.0), &SimConfig::default())
            .is_err());
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        let err = simulate(&robot(), |t| if t > 0.5 { f64::INFINITY } else { 0.0 },
            JointState::default(), (0.0, 1.0), &SimConfig { dt: 1e-2, ..SimConfig::default() })
            .unwrap_err();
        match err {
            Error::Unstable { time } => assert!((time - 0.51).abs() < 1e-9 || (time - 0.5).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(Error::Unstable { time: 0.0 }.exit_code(), 4);
    }

    #[test]
    fn tracking_error_of_identical_series_is_zero() {
        let cfg = SimConfig { dt: 1e-2, t_free: 0.1, ..SimConfig::default() };
        let traj = simulate(&robot(), |t| 1e-3 * t, JointState::default(), (0.0, 1.0), &cfg).unwrap();
        assert_eq!(planned_vs_simulated(&traj.states, &traj).unwrap(), (0.0, 0.0));
        assert!(matches!(
            planned_vs_simulated(&traj.states[1..], &traj),
            Err(Error::GridMismatch(_))
        ));
    }
}
