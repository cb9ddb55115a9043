//! `hbm`: command-line front end for simulating, fitting and analysing
//! hot-Brownian-motion measurements.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hbm", version, about = "Hot Brownian motion of levitated nanoparticles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file for this command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; small results go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a detector trace (and optionally an ESR spectrum) from a simulation config.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Welch PSD of every channel of a trace CSV.
    Psd {
        trace: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the oscillator model to a PSD CSV.
    FitPsd {
        psd: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit ESR spectra (one file or a directory) and convert them to temperatures.
    FitEsr {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Zero-power calibration of a single-pressure power sweep of traces.
    Calibrate {
        traces: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Coupling constant K from an energy series and a temperature series.
    ExtractK {
        /// Energy series JSON written by `calibrate`.
        #[arg(long)]
        energy: PathBuf,
        /// Temperature series JSON written by `fit-esr` on a directory.
        #[arg(long)]
        temperature: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Full powers × pressures campaign from a campaign config.
    Campaign {
        #[command(flatten)]
        common: Common,
    },
    /// K along both axes of a cylinder as its aspect ratio varies.
    CylinderK {
        #[command(flatten)]
        common: Common,
    },
}

/// Exit codes: 0 success, 1 other errors, 2 fit or calibration failure, 3 invalid configuration.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate { common } => commands::simulate(&common),
        Command::Psd { trace, common } => commands::psd(&trace, &common),
        Command::FitPsd { psd, common } => commands::fit_psd(&psd, &common),
        Command::FitEsr { input, common } => commands::fit_esr(&input, &common),
        Command::Calibrate { traces, common } => commands::calibrate(&traces, &common),
        Command::ExtractK {
            energy,
            temperature,
            common,
        } => commands::extract_k(&energy, &temperature, &common),
        Command::Campaign { common } => commands::campaign(&common),
        Command::CylinderK { common } => commands::cylinder_k(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
