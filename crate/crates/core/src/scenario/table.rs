use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::dynsim::SimConfig;
use crate::error::Result;
use crate::metrics::{relative_change, ScenarioMetrics};
use crate::varplanner::{StrategyKind, StrategySpec};

/// Published values for one scenario cell. `amplitude` is `None` where only
/// an upper bound applies (undamped robot).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub torque_rms: f64,
    pub amplitude: Option<f64>,
    pub torque_change: Option<f64>,
    pub amplitude_change: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance on torque RMS.
    pub torque_rel: f64,
    /// Relative tolerance on the amplitude.
    pub amplitude_rel: f64,
    /// Upper bound on the amplitude for the undamped scenario (rad).
    pub amplitude_abs: f64,
    /// Tolerance on relative changes, in percentage points.
    pub change_pp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            torque_rel: 0.03,
            amplitude_rel: 0.10,
            amplitude_abs: 1e-4,
            change_pp: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub scenario: u8,
    pub strategy: StrategyKind,
    pub metrics: ScenarioMetrics,
    /// Percentage change against the polynomial row of the same scenario.
    pub torque_change: Option<f64>,
    pub amplitude_change: Option<f64>,
    pub reference: ReferenceValues,
    pub torque_pass: bool,
    pub amplitude_pass: bool,
    pub torque_change_pass: Option<bool>,
    pub amplitude_change_pass: Option<bool>,
}

impl ResultsRow {
    pub fn all_pass(&self) -> bool {
        self.torque_pass
            && self.amplitude_pass
            && self.torque_change_pass.unwrap_or(true)
            && self.amplitude_change_pass.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultsRow>,
    pub tolerances: Tolerances,
    /// Scenario 3 torques are bitwise equal to Scenario 2's.
    pub scenario3_torque_equals_scenario2: bool,
}

impl ResultsTable {
    pub fn row(&self, scenario: u8, strategy: StrategyKind) -> Option<&ResultsRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.strategy == strategy)
    }

    pub fn all_pass(&self) -> bool {
        self.scenario3_torque_equals_scenario2 && self.rows.iter().all(ResultsRow::all_pass)
    }
}

const STRATEGIES: [StrategyKind; 3] = [
    StrategyKind::Polynomial,
    StrategyKind::MinControlEffort,
    StrategyKind::MinPotentialEnergy,
];

fn reference(scenario: u8, strategy: StrategyKind) -> ReferenceValues {
    let idx = STRATEGIES.iter().position(|s| *s == strategy).unwrap_or(0);
    let (torque, amplitude, torque_change, amplitude_change): ([f64; 3], Option<[f64; 3]>, [f64; 2], Option<[f64; 2]>) =
        match scenario {
            1 => ([0.0074, 0.0069, 0.0087], None, [-6.8, 18.0], None),
            2 => ([0.0068, 0.0064, 0.0079], Some([0.0045, 0.0036, 0.003]), [-5.9, 16.0], Some([-20.0, -35.0])),
            _ => ([0.0068, 0.0064, 0.0079], Some([0.099, 0.077, 0.062]), [-5.9, 16.0], Some([-22.0, -38.0])),
        };
    let change = |v: [f64; 2]| if idx == 0 { None } else { Some(v[idx - 1]) };
    ReferenceValues {
        torque_rms: torque[idx],
        amplitude: amplitude.map(|a| a[idx]),
        torque_change: change(torque_change),
        amplitude_change: amplitude_change.and_then(change),
    }
}

/// The nine reference cells: scenarios 1 to 3 crossed with the polynomial,
/// min-control-effort (`r = 150`) and min-potential-energy (`p = 17`)
/// strategies. Scenario 1 has no passive damping, Scenario 2 has
/// `c2 = 2e-5`, Scenario 3 simulates Scenario 2's plan on a plant with
/// stiffness and damping 10 % above nominal.
pub fn reference_scenarios(base: SimConfig) -> Vec<(u8, ScenarioConfig)> {
    let mut out = Vec::with_capacity(9);
    for scenario in 1..=3u8 {
        for kind in STRATEGIES {
            let mut cfg = ScenarioConfig::default();
            cfg.strategy = StrategySpec::new(kind, 150.0, 17.0);
            cfg.sim = base.into();
            match scenario {
                1 => cfg.robot.c2 = 0.0,
                2 => {}
                _ => {
                    cfg.sim.k_scale = 1.1;
                    cfg.sim.c_scale = 1.1;
                }
            }
            out.push((scenario, cfg));
        }
    }
    out
}

pub fn reproduce_results_table() -> Result<ResultsTable> {
    reproduce_results_table_with(SimConfig::default(), Tolerances::default())
}

/// Runs the nine reference cells concurrently and compares them with the
/// published values. `base` sets the integration step and free-response time;
/// its stiffness and damping scales are overridden per scenario.
pub fn reproduce_results_table_with(base: SimConfig, tol: Tolerances) -> Result<ResultsTable> {
    let cells = reference_scenarios(base);
    let results: Vec<Result<_>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .map(|(_, cfg)| scope.spawn(move || super::execute(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }

    let mut rows = Vec::with_capacity(9);
    for (((scenario, cfg), run), i) in cells.iter().zip(&runs).zip(0..) {
        let baseline = &runs[i - i % 3].report.metrics;
        let m = run.report.metrics;
        let reference = reference(*scenario, cfg.strategy.kind);
        let is_baseline = i % 3 == 0;

        let torque_change = if is_baseline {
            None
        } else {
            Some(relative_change(baseline.torque_rms, m.torque_rms)?)
        };
        let amplitude_change = if is_baseline || reference.amplitude.is_none() {
            None
        } else {
            Some(relative_change(baseline.amplitude_a, m.amplitude_a)?)
        };

        let within = |v: f64, r: f64, rel: f64| (v - r).abs() <= rel * r.abs();
        let pp = |v: Option<f64>, r: Option<f64>| match (v, r) {
            (Some(v), Some(r)) => Some((v - r).abs() <= tol.change_pp),
            _ => None,
        };
        rows.push(ResultsRow {
            scenario: *scenario,
            strategy: cfg.strategy.kind,
            metrics: m,
            torque_change,
            amplitude_change,
            reference,
            torque_pass: within(m.torque_rms, reference.torque_rms, tol.torque_rel),
            amplitude_pass: match reference.amplitude {
                Some(a) => within(m.amplitude_a, a, tol.amplitude_rel),
                None => m.amplitude_a < tol.amplitude_abs,
            },
            torque_change_pass: pp(torque_change, reference.torque_change),
            amplitude_change_pass: pp(amplitude_change, reference.amplitude_change),
        });
    }

    let scenario3_torque_equals_scenario2 = (0..3).all(|j| {
        let s2 = &runs[3 + j].trajectory;
        let s3 = &runs[6 + j].trajectory;
        s2.torque == s3.torque && rows[3 + j].metrics.torque_rms == rows[6 + j].metrics.torque_rms
    });

    Ok(ResultsTable {
        rows,
        tolerances: tol,
        scenario3_torque_equals_scenario2,
    })
}

/// `x` rounded to `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // let the formatter do the rounding, then pick a layout from the exponent
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if exp < -4 || exp >= digits as i32 {
        sci
    } else {
        format!("{:.*}", (digits as i32 - 1 - exp) as usize, x)
    }
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_else(|| "-".into())
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "ok",
        Some(false) => "FAIL",
        None => "-",
    }
}

impl fmt::Display for ResultsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<3} {:<22} {:>11} {:>8} {:>5} {:>11} {:>8} {:>5} {:>9} {:>7} {:>5} {:>9} {:>7} {:>5}",
            "sc", "strategy", "tau_rms", "ref", "", "A", "ref", "", "dtau%", "ref", "", "dA%", "ref", ""
        )?;
        for r in &self.rows {
            let pct = |v: f64| format!("{v:+.1}");
            writeln!(
                f,
                "{:<3} {:<22} {:>11} {:>8} {:>5} {:>11} {:>8} {:>5} {:>9} {:>7} {:>5} {:>9} {:>7} {:>5}",
                r.scenario,
                r.strategy.name(),
                format_sig(r.metrics.torque_rms, 6),
                r.reference.torque_rms,
                flag(Some(r.torque_pass)),
                format_sig(r.metrics.amplitude_a, 6),
                match r.reference.amplitude {
                    Some(a) => a.to_string(),
                    None => format!("<{}", self.tolerances.amplitude_abs),
                },
                flag(Some(r.amplitude_pass)),
                opt(r.torque_change, pct),
                opt(r.reference.torque_change, pct),
                flag(r.torque_change_pass),
                opt(r.amplitude_change, pct),
                opt(r.reference.amplitude_change, pct),
                flag(r.amplitude_change_pass),
            )?;
        }
        writeln!(
            f,
            "scenario 3 torque identical to scenario 2: {}",
            if self.scenario3_torque_equals_scenario2 { "ok" } else { "FAIL" }
        )
    }
}
