//! `gantrycam`: plan camera routes, simulate imaging runs, segment images,
//! validate metadata and compute production statistics.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gantrycam", version, about = "Gantry plant-imaging simulator and dataset toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags override the config file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; unspecified fields take their defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Render downsampling factor (1 = full camera resolution).
    #[arg(long)]
    pub scale: Option<u32>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Emit boxes with the origin at the upper-right corner (x mirrored).
    #[arg(long)]
    pub legacy_origin: bool,
    /// Print the JSON report to stdout instead of the text summary.
    #[arg(long)]
    pub json: bool,
    /// Run data-parallel loops on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Order waypoints with the zig-zag planner and compare with baselines.
    Plan(commands::PlanArgs),
    /// Simulate an imaging run and write masters, subimages and metadata.
    Simulate(commands::SimulateArgs),
    /// Key out the blue background of an image and write a mask.
    Segment(commands::SegmentArgs),
    /// Check every metadata file in a directory against the schema.
    Validate(commands::ValidateArgs),
    /// Production rates, class weights and confidence intervals.
    Stats(commands::StatsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => commands::plan(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Segment(a) => commands::segment(a),
        Command::Validate(a) => commands::validate(a),
        Command::Stats(a) => commands::stats(a),
    };
    match result {
        Ok(commands::Status::Clean) => ExitCode::SUCCESS,
        Ok(commands::Status::Findings) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
