use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use softarm::workspace::{fit_shell, sample_workspace};
use softarm_sim::emit::{self, WorkspaceResult};
use softarm_sim::{load_config, run_scenario, Result, Scenario, ScenarioKind, SimConfig, SimError};

#[derive(Parser)]
#[command(
    name = "softarm",
    version,
    about = "Soft continuum arm on a pneumatic prismatic base: simulation scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; the shipped configuration when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for Monte-Carlo sampling, recorded with every run.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    /// Lock the prismatic joint at zero extension.
    #[arg(long, global = true)]
    no_prismatic: bool,
    /// Monte-Carlo sample count for `workspace`.
    #[arg(long, global = true, default_value_t = 200_000, value_name = "N")]
    samples: usize,
    /// Scenario duration in seconds, overriding the configured one.
    #[arg(long, global = true, value_name = "S")]
    duration: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the reachable workspace with and without the prismatic joint and compare shell volumes.
    Workspace,
    /// Track a reference trajectory in closed loop.
    Track {
        #[arg(value_enum)]
        shape: Shape,
    },
    /// Scripted pick-and-place waypoint sequence.
    Pick,
    /// Hold the home pose.
    Hold,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Helix,
    Circle,
    Line,
    VerticalLine,
}

fn load(common: &Common) -> Result<SimConfig> {
    match &common.config {
        Some(path) => load_config(path),
        None => SimConfig::shipped(),
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let mut config = load(common)?;
    if common.no_prismatic {
        config.model = config.model.with_prismatic_locked();
    }
    let kind = match cli.command {
        Command::Workspace => return workspace(&config, common),
        Command::Track { shape } => match shape {
            Shape::Helix => ScenarioKind::TrackHelix,
            Shape::Circle => ScenarioKind::TrackCircle,
            Shape::Line => ScenarioKind::TrackLine,
            Shape::VerticalLine => ScenarioKind::TrackVerticalLine,
        },
        Command::Pick => ScenarioKind::PickPlace,
        Command::Hold => ScenarioKind::Hold,
    };
    let scenario = Scenario::new(kind, &config.trajectory, common.duration, common.seed)?;
    let log = run_scenario(&config.model, &config.hysteresis, &config.gains, &scenario)?;
    let files = emit::emit_results(&log, &common.out)?;
    print!("{}", emit::summary_text(&log));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn workspace(config: &SimConfig, common: &Common) -> Result<()> {
    let core = |e: softarm::Error| SimError::Validation(e.to_string());
    let base = config.model.with_prismatic_locked();
    let without = sample_workspace(&base, common.samples, common.seed, false).map_err(core)?;
    let without_fit = fit_shell(&without).map_err(core)?;
    let with = if common.no_prismatic {
        None
    } else {
        let mut model = config.model.clone();
        model.prismatic_locked = false;
        Some(sample_workspace(&model, common.samples, common.seed, true).map_err(core)?)
    };
    let with_fit = with.as_ref().map(fit_shell).transpose().map_err(core)?;
    let result = WorkspaceResult {
        with: with.as_ref().zip(with_fit),
        without: (&without, without_fit),
        samples: common.samples,
        seed: common.seed,
    };
    let files = emit::emit_workspace(&result, &common.out)?;
    let summary = common.out.join("workspace_summary.txt");
    print!(
        "{}",
        std::fs::read_to_string(&summary).map_err(|e| SimError::io(&summary, e))?
    );
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("softarm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
