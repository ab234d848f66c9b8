//! Scenario configuration, the plan / simulate / evaluate pipeline, trajectory
//! CSV output and the reference results table.

mod config;
mod table;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use config::{Angle, MotionConfig, RobotConfig, ScenarioConfig, SimSection};
pub use table::{
    format_sig, reference_scenarios, reproduce_results_table, reproduce_results_table_with,
    ReferenceValues, ResultsRow, ResultsTable, Tolerances,
};

use crate::dynsim::{planned_vs_simulated, simulate, SimConfig, Trajectory};
use crate::error::Result;
use crate::flatmodel::{feedforward_torque, joint_state_from_flat, FlatSample, JointState};
use crate::metrics::{oscillation_amplitude, torque_rms, ScenarioMetrics};
use crate::varplanner::{plan, MotionLaw};

pub const VERSION: &str = concat!("flatopt ", env!("CARGO_PKG_VERSION"));

/// Metrics of one run together with the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub version: String,
    #[serde(flatten)]
    pub metrics: ScenarioMetrics,
    pub config: ScenarioConfig,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Config(e.to_string()))
    }
}

/// Everything produced by one pipeline run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub law: MotionLaw,
    pub trajectory: Trajectory,
    /// Flat-output samples on the simulation grid.
    pub flat: Vec<FlatSample>,
    /// Joint motion reconstructed from the plan on the simulation grid.
    pub planned: Vec<JointState>,
}

/// Plans the motion law for `config`.
pub fn plan_scenario(config: &ScenarioConfig) -> Result<MotionLaw> {
    config.validate()?;
    let params = config.robot.params()?;
    let bounds = config.motion.bounds()?;
    plan(&config.strategy, &params, &bounds)
}

/// Full pipeline: plan, feed-forward torque, simulation on the (possibly
/// perturbed) plant, metrics.
pub fn execute(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let law = plan_scenario(config)?;
    let params = config.robot.params()?;
    let bounds = law.bounds;
    let sim = SimConfig::from(config.sim);

    // orders 0..=5 at the start are the boundary conditions themselves
    let mut first = law.eval(bounds.t_start);
    first.d[..6].copy_from_slice(&bounds.start);
    let initial = joint_state_from_flat(&params, &first);

    let trajectory = simulate(
        &params,
        |t| feedforward_torque(&params, &law.eval(t)),
        initial,
        (bounds.t_start, bounds.t_end),
        &sim,
    )?;

    let flat: Vec<FlatSample> = trajectory.times.iter().map(|&t| law.eval(t)).collect();
    let planned: Vec<JointState> = flat.iter().map(|s| joint_state_from_flat(&params, s)).collect();
    let (e1, e2) = planned_vs_simulated(&planned, &trajectory)?;

    let metrics = ScenarioMetrics {
        torque_rms: torque_rms(&trajectory, (bounds.t_start, bounds.t_end))?,
        amplitude_a: oscillation_amplitude(&params, &trajectory),
        bc_residual_max: law.bc_residual,
        tracking_error_q1: e1,
        tracking_error_q2: e2,
        condition_number: law.condition_number,
    };
    let report = ScenarioReport {
        version: VERSION.to_string(),
        metrics,
        config: config.clone(),
    };
    Ok(ScenarioRun {
        report,
        law,
        trajectory,
        flat,
        planned,
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    execute(config).map(|run| run.report)
}

pub const TRAJECTORY_HEADER: &str = "t,y1,y1_d1,y1_d2,y1_d3,y1_d4,y1_d5,y1_d6,\
q1_planned,q2_planned,q1_sim,q2_sim,q1dot_sim,q2dot_sim,tau1";

pub const PLAN_HEADER: &str = "t,y1,y1_d1,y1_d2,y1_d3,y1_d4,y1_d5,y1_d6,q1_planned,q2_planned,tau1";

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "{v:e}").expect("write to string");
    }
    out.push('\n');
}

impl ScenarioRun {
    /// Trajectory CSV: one row per simulation sample, LF line endings.
    pub fn trajectory_csv(&self) -> String {
        let traj = &self.trajectory;
        let mut out = String::with_capacity(traj.len() * 15 * 24);
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for i in 0..traj.len() {
            let s = &traj.states[i];
            let p = &self.planned[i];
            let row = std::iter::once(traj.times[i])
                .chain(self.flat[i].d)
                .chain([p.q1, p.q2, s.q1, s.q2, s.q1_dot, s.q2_dot, traj.torque[i]]);
            push_row(&mut out, row);
        }
        out
    }
}

/// Motion-law samples on a grid of step close to `dt` over the motion
/// interval, with the planned joint motion and feed-forward torque.
pub fn plan_csv(config: &ScenarioConfig, law: &MotionLaw) -> Result<String> {
    let params = config.robot.params()?;
    SimConfig::from(config.sim).validate()?;
    let b = &law.bounds;
    let steps = (b.duration() / config.sim.dt).round().max(1.0) as usize;
    let h = b.duration() / steps as f64;
    let mut out = String::with_capacity((steps + 1) * 11 * 24);
    out.push_str(PLAN_HEADER);
    out.push('\n');
    for i in 0..=steps {
        let t = if i == steps { b.t_end } else { b.t_start + h * i as f64 };
        let s = law.eval(t);
        let q = joint_state_from_flat(&params, &s);
        let row = std::iter::once(t)
            .chain(s.d)
            .chain([q.q1, q.q2, feedforward_torque(&params, &s)]);
        push_row(&mut out, row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varplanner::StrategyKind;

    fn coarse() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.sim.dt = 1e-3;
        cfg.sim.t_free = 0.2;
        cfg
    }

    #[test]
    fn report_round_trips_through_json() {
        let report = run_scenario(&coarse().with_strategy(StrategyKind::MinControlEffort)).unwrap();
        let text = report.to_json();
        let back = ScenarioReport::from_json(&text).unwrap();
        assert_eq!(back, report);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "torque_rms_Nm",
            "amplitude_a_rad",
            "bc_residual_max",
            "tracking_error_q1_rad",
            "tracking_error_q2_rad",
            "condition_number",
            "config",
            "version",
        ] {
            assert!(value.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn rerunning_an_echoed_config_reproduces_the_report() {
        let report = run_scenario(&coarse()).unwrap();
        let again = run_scenario(&ScenarioConfig::from_json(&report.config.to_json()).unwrap()).unwrap();
        assert_eq!(again, report);
    }

    #[test]
    fn trajectory_csv_layout() {
        let run = execute(&coarse()).unwrap();
        let csv = run.trajectory_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), run.trajectory.len());
        assert!(rows.iter().all(|r| r.split(',').count() == 15));
        assert!(!csv.contains('\r'));
        let last: Vec<f64> = rows.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[0], run.trajectory.times[run.trajectory.len() - 1]);
        assert_eq!(last[14], 0.0);
        assert_eq!(csv, execute(&coarse()).unwrap().trajectory_csv());
    }

    #[test]
    fn plan_csv_covers_the_motion() {
        let cfg = coarse();
        let law = plan_scenario(&cfg).unwrap();
        let csv = plan_csv(&cfg, &law).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 1001);
        let last: Vec<f64> = rows[1000].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[0], 1.0);
        assert!((last[1] - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn undamped_plant_tracks_the_plan() {
        let mut cfg = coarse();
        cfg.robot.c2 = 0.0;
        cfg.sim.dt = 1e-4;
        for kind in StrategyKind::ALL {
            let r = run_scenario(&cfg.clone().with_strategy(kind)).unwrap();
            assert!(r.metrics.tracking_error_q1 < 1e-4, "{kind}");
            assert!(r.metrics.tracking_error_q2 < 1e-4, "{kind}");
            assert!(r.metrics.amplitude_a < 1e-4, "{kind}");
        }
    }

    #[test]
    fn pipeline_errors_keep_their_exit_codes() {
        let mut cfg = coarse().with_strategy(StrategyKind::MinPotentialEnergy);
        cfg.strategy.p = 1e4;
        assert_eq!(run_scenario(&cfg).unwrap_err().exit_code(), 3);
        let mut cfg = coarse();
        cfg.sim.dt = 0.05;
        cfg.sim.t_free = 5.0;
        cfg.robot.k2 = 30.0;
        assert_eq!(run_scenario(&cfg).unwrap_err().exit_code(), 4);
    }
}
