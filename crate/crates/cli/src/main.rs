use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsecmd_cli::pipeline;
use sparsecmd_cli::{CliError, CliResult, ExperimentConfig};

const AFTER_HELP: &str = "\
Stages read and write files in the output directory:
  design    design.json, coefficients.{csv,txt}
            columns: i, theta2, theta_sparse, eta_sparse, y_ref
  quantize  quantized.json, levels.{csv,txt}, bits.{csv,txt},
            payload_<design>.bin (packed bytes) and payload_<design>.json
  simulate  trajectories.csv  columns: time, u_<variant>, y_<variant>, ...
            errors.csv        columns: time, err_<variant>, ...
            e2.{csv,txt}      columns: design, e2_raw, e2_quantized, increase
            simulation.json
            variants are the three designs and their received quantized
            versions (suffix _q)
  report    report.json, summary.{csv,txt}
  all       every stage in order

Exit codes: 0 success, 2 config error, 3 solver did not converge,
4 missing artifacts, 5 simulation grid too coarse, 1 anything else.";

#[derive(Parser)]
#[command(name = "sparsecmd", version, about = "Sparse command design for remote-controlled LTI plants", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the l2, l1-l2 (FISTA) and eta-shrinkage designs.
    Design(Common),
    /// Quantize the designs and write the sparse payloads.
    Quantize(Common),
    /// Decode the payloads, rebuild the commands and simulate the plant.
    Simulate(Common),
    /// Collect every stage into one JSON report.
    Report(Common),
    /// Run design, quantize, simulate and report.
    All(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "paper_example",
        required_unless_present = "paper_example"
    )]
    config: Option<PathBuf>,
    /// Use the built-in example: 1/(s+1)^2, Y_i = sin(i*pi/6), i = 1..12.
    #[arg(long)]
    paper_example: bool,
    /// Output directory [default: config output_dir, else ./out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Uniform simulation steps over the horizon (overrides the config).
    #[arg(long, value_name = "N")]
    grid_steps: Option<usize>,
    /// Reserved. The pipeline is deterministic and ignores it.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> CliResult<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::paper_example(),
        };
        if let Some(steps) = self.grid_steps {
            cfg.grid_steps = steps;
            cfg.check()?;
        }
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, dir))
    }
}

type Stage = fn(&ExperimentConfig, &std::path::Path) -> CliResult<pipeline::StageOutput>;

fn run(cli: Cli) -> CliResult<String> {
    let (common, stage): (&Common, Stage) = match &cli.command {
        Command::Design(c) => (c, pipeline::design),
        Command::Quantize(c) => (c, pipeline::quantize_stage),
        Command::Simulate(c) => (c, pipeline::simulate_stage),
        Command::Report(c) => (c, pipeline::report_stage),
        Command::All(c) => (c, pipeline::run_all),
    };
    let (cfg, dir) = common.resolve()?;
    Ok(stage(&cfg, &dir)?.render())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sparsecmd: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &CliError) -> u8 {
    u8::try_from(e.exit_code()).unwrap_or(1)
}
