use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flatopt::scenario::{
    execute, format_sig, plan_csv, plan_scenario, reproduce_results_table_with, Tolerances,
};
use flatopt::{Error, ScenarioConfig, SimConfig, StrategyKind};

#[derive(Parser)]
#[command(name = "flatopt", version, about = "Optimal flat-output planning for an underactuated robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the motion law and write its samples as CSV
    Plan(ScenarioArgs),
    /// Plan, simulate and write the trajectory CSV
    Simulate(ScenarioArgs),
    /// Full pipeline; prints the metrics
    Run(ScenarioArgs),
    /// Reproduce the nine-cell reference results table
    Table(TableArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario configuration (JSON); defaults apply to missing fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary output path
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, value_name = "S")]
    dt: Option<f64>,
    #[arg(long, value_name = "S")]
    t_free: Option<f64>,
    /// polynomial, min_control_effort, min_potential_energy or mixed
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k_scale: Option<f64>,
    #[arg(long)]
    c_scale: Option<f64>,
}

#[derive(Args)]
struct TableArgs {
    /// JSON output path for the table
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, value_name = "S")]
    dt: Option<f64>,
    #[arg(long, value_name = "S")]
    t_free: Option<f64>,
}

enum Failure {
    Core(Error),
    Io(PathBuf, io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_config(args: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(path.clone(), e))?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = &args.strategy {
        cfg.strategy.kind = s.parse::<StrategyKind>()?;
    }
    let overrides = [
        (args.r, &mut cfg.strategy.r),
        (args.p, &mut cfg.strategy.p),
        (args.dt, &mut cfg.sim.dt),
        (args.t_free, &mut cfg.sim.t_free),
        (args.k_scale, &mut cfg.sim.k_scale),
        (args.c_scale, &mut cfg.sim.c_scale),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn emit(path: Option<&PathBuf>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn cmd_plan(args: &ScenarioArgs) -> CliResult<()> {
    let cfg = load_config(args)?;
    let law = plan_scenario(&cfg)?;
    emit(args.out.as_ref(), &plan_csv(&cfg, &law)?)?;
    if let Some(path) = &args.summary {
        let json = serde_json::json!({
            "version": flatopt::scenario::VERSION,
            "bc_residual_max": law.bc_residual,
            "condition_number": law.condition_number,
            "law": law,
            "config": cfg,
        });
        write_file(path, &serde_json::to_string_pretty(&json).expect("serializable"))?;
    }
    Ok(())
}

fn cmd_simulate(args: &ScenarioArgs) -> CliResult<()> {
    let cfg = load_config(args)?;
    let run = execute(&cfg)?;
    emit(args.out.as_ref(), &run.trajectory_csv())?;
    if let Some(path) = &args.summary {
        write_file(path, &run.report.to_json())?;
    }
    Ok(())
}

fn cmd_run(args: &ScenarioArgs) -> CliResult<()> {
    let cfg = load_config(args)?;
    let run = execute(&cfg)?;
    if let Some(path) = &args.out {
        write_file(path, &run.trajectory_csv())?;
    }
    if let Some(path) = &args.summary {
        write_file(path, &run.report.to_json())?;
    }
    let m = &run.report.metrics;
    println!("strategy               {}", cfg.strategy.kind);
    println!("torque_rms_Nm          {}", format_sig(m.torque_rms, 6));
    println!("amplitude_a_rad        {}", format_sig(m.amplitude_a, 6));
    println!("bc_residual_max        {}", format_sig(m.bc_residual_max, 6));
    println!("tracking_error_q1_rad  {}", format_sig(m.tracking_error_q1, 6));
    println!("tracking_error_q2_rad  {}", format_sig(m.tracking_error_q2, 6));
    println!("condition_number       {}", format_sig(m.condition_number, 6));
    Ok(())
}

fn cmd_table(args: &TableArgs) -> CliResult<()> {
    let mut base = SimConfig::default();
    if let Some(dt) = args.dt {
        base.dt = dt;
    }
    if let Some(t) = args.t_free {
        base.t_free = t;
    }
    base.validate()?;
    let table = reproduce_results_table_with(base, Tolerances::default())?;
    print!("{table}");
    if let Some(path) = &args.summary {
        write_file(path, &serde_json::to_string_pretty(&table).expect("serializable"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Run(a) => cmd_run(a),
        Command::Table(a) => cmd_table(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error[io]: {}: {e}", path.display());
            ExitCode::from(1)
        }
    }
}
