use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ringcav::scenario::{self, Command, RunOptions};

/// Ring cavity with an intra-cavity dispersive medium.
#[derive(Parser, Debug)]
#[command(name = "ringcav", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scenario configuration (TOML). Defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides the config and RINGCAV_OUT_DIR).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Also write an SVG figure.
    #[arg(long, global = true)]
    plot: bool,

    /// Reserved for stochastic extensions; recorded in metadata.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Transmission spectrum and extracted linewidth.
    Spectrum,
    /// Loaded resonance shift over a grid of empty-cavity shifts.
    ShiftScan,
    /// Shift enhancement near critically anomalous dispersion.
    CadScan,
    /// Fit EIT medium parameters to a window width and group index.
    Calibrate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::ShiftScan => Command::ShiftScan,
        Cmd::CadScan => Command::CadScan,
        Cmd::Calibrate => Command::Calibrate,
    };
    let opts = RunOptions {
        config: cli.config,
        out: cli.out,
        plot: cli.plot,
        seed: cli.seed,
    };
    match scenario::run(command, &opts) {
        Ok(report) => {
            print!("{}", report.text);
            for file in &report.files {
                log::info!("output {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
