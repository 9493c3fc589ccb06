use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use gastrodose::harness::{load_config, run_scenario, Overrides, ScenarioKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Baseline,
    Optimize,
    Fixed,
    Compare,
    Sweep,
}

impl From<Kind> for ScenarioKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Baseline => ScenarioKind::Baseline,
            Kind::Optimize => ScenarioKind::Optimize,
            Kind::Fixed => ScenarioKind::Fixed,
            Kind::Compare => ScenarioKind::Compare,
            Kind::Sweep => ScenarioKind::Sweep,
        }
    }
}

/// Gastric acid simulation and PPI dose scheduling.
#[derive(Debug, Parser)]
#[command(name = "gastrodose", version)]
struct Cli {
    /// Scenario to run.
    #[arg(value_enum)]
    scenario: Kind,
    /// Scenario configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Treatment length in days.
    #[arg(long)]
    days: Option<u32>,
    /// Corpal acid ceiling, mol/L.
    #[arg(long = "acid-max")]
    acid_max: Option<f64>,
    /// Largest single dose, mg.
    #[arg(long = "dose-max")]
    dose_max: Option<f64>,
    /// Bisection tolerance, mg.
    #[arg(long)]
    delta: Option<f64>,
    /// Fixed-regimen dose, mg (default: minimal feasible).
    #[arg(long = "fixed-dose")]
    fixed_dose: Option<f64>,
    /// Comma-separated k_AG values for the sweep.
    #[arg(long, value_delimiter = ',')]
    kag: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    cfg.kind = cli.scenario.into();
    cfg.out_dir = cli.out;
    let overrides = Overrides {
        days: cli.days,
        acid_max: cli.acid_max,
        dose_max: cli.dose_max,
        delta: cli.delta,
        fixed_dose: cli.fixed_dose,
        kag: cli.kag,
    };
    if let Err(e) = cfg.apply(&overrides) {
        return fail(&e);
    }
    match run_scenario(&cfg) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if let (Some(msg), Some(code)) = (outcome.sweep_error, outcome.sweep_error_exit) {
                eprintln!("error: {msg}");
                return ExitCode::from(code as u8);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &gastrodose::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.category().exit_code() as u8)
}
