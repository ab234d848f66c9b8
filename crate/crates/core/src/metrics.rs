//! Torque RMS, residual oscillation amplitude and relative changes.

use serde::{Deserialize, Serialize};

use crate::dynsim::Trajectory;
use crate::error::{Error, Result};
use crate::flatmodel::ReducedFlatParams;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    #[serde(rename = "torque_rms_Nm")]
    pub torque_rms: f64,
    #[serde(rename = "amplitude_a_rad")]
    pub amplitude_a: f64,
    pub bc_residual_max: f64,
    #[serde(rename = "tracking_error_q1_rad")]
    pub tracking_error_q1: f64,
    #[serde(rename = "tracking_error_q2_rad")]
    pub tracking_error_q2: f64,
    pub condition_number: f64,
}

/// Root mean square of the applied torque over `window`, by trapezoidal
/// quadrature on the simulation grid.
pub fn torque_rms(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let (start, end) = window;
    let empty = Error::EmptyWindow { start, end };
    if !(end > start) {
        return Err(empty);
    }
    let slack = 1e-9 * traj.step().max(f64::MIN_POSITIVE);
    let idx: Vec<usize> = (0..traj.len())
        .filter(|&i| traj.times[i] >= start - slack && traj.times[i] <= end + slack)
        .collect();
    if idx.len() < 2 {
        return Err(empty);
    }
    let integral: f64 = idx
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            0.5 * (traj.times[b] - traj.times[a]) * (traj.torque[a].powi(2) + traj.torque[b].powi(2))
        })
        .sum();
    let span = traj.times[idx[idx.len() - 1]] - traj.times[idx[0]];
    Ok((integral / span).sqrt())
}

/// Initial amplitude of the passive joint's free oscillation at the end of the
/// motion, `sqrt(q2^2 + (I*/k) q2'^2)`, with the nominal robot parameters.
pub fn oscillation_amplitude(params: &ReducedFlatParams, traj: &Trajectory) -> f64 {
    let s = traj.end_state();
    (s.q2 * s.q2 + params.i_star_last / params.stiffness * s.q2_dot * s.q2_dot).sqrt()
}

/// Percentage change of `value` relative to `baseline`.
pub fn relative_change(baseline: f64, value: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (value - baseline) / baseline)
}
