mod analyze;
mod options;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use options::Overrides;

#[derive(Parser)]
#[command(name = "massimo", version, about = "Queue alignment analytics from pose keypoints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write report.json, overlay.png and topview.svg.
    Analyze {
        keypoints: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Only check that the keypoint file parses and matches the schema.
        #[arg(long)]
        validate_only: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Analyze several keypoint files in parallel, one output folder each.
    Batch {
        #[arg(required = true)]
        keypoints: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit the queue line to a keypoint file and print the coefficients.
    Fit {
        keypoints: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write only the overlay PNG and top-view SVG.
    Render {
        keypoints: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a synthetic queue as a keypoint file plus a ground-truth sidecar.
    Synth(sim::SynthArgs),
    /// Score the detection methods over a range of synthetic scenes.
    Eval(sim::EvalArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file. Falls back to $MASSIMO_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze {
            keypoints,
            out,
            validate_only,
            common,
        } => {
            if validate_only {
                return analyze::validate(&keypoints);
            }
            let config = options::load_config(common.config.as_deref(), &common.overrides)?;
            analyze::analyze_to_dir(&keypoints, &config, &out, true).map(|_| ())
        }
        Command::Batch {
            keypoints,
            out,
            jobs,
            common,
        } => {
            let config = options::load_config(common.config.as_deref(), &common.overrides)?;
            analyze::batch(&keypoints, &config, &out, jobs)
        }
        Command::Fit { keypoints, common } => {
            let config = options::load_config(common.config.as_deref(), &common.overrides)?;
            analyze::fit(&keypoints, &config)
        }
        Command::Render { keypoints, out, common } => {
            let config = options::load_config(common.config.as_deref(), &common.overrides)?;
            analyze::analyze_to_dir(&keypoints, &config, &out, false).map(|_| ())
        }
        Command::Synth(args) => sim::synth(&args),
        Command::Eval(args) => sim::eval(&args),
    }
}

pub(crate) fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<massimo_core::Error>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
