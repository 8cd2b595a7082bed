//! Command-line front end of the ion-transport simulator; the `shuttle`
//! binary calls [`main_with`].

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use shuttle_core::Error as CoreError;

/// Invalid command-line or configuration input detected by the front end.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Parser)]
#[command(name = "shuttle", version, about = "Ion transport in a segmented linear Paul trap")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long, global = true, env = "SHUTTLE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory for output tables and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for trials and sweeps; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Radial and axial trap parameters and ion-crystal spacings.
    Characterize,
    /// Synthesise the electrode waveform of the configured ramp.
    Waveform,
    /// Integrate the ion through a generated or replayed waveform.
    Transport(commands::TransportArgs),
    /// Success probability and excitation against the transport time.
    SweepTau(commands::SweepTauArgs),
    /// Excitation against the ramp slope parameter.
    SweepSigma(commands::SweepSigmaArgs),
    /// Fit RF-phase histograms and locate the compensation optimum.
    FitMicromotion(commands::MicromotionArgs),
    /// Estimate the motional energy from a recooling trace.
    RecoverEnergy(commands::RecoverArgs),
}

/// 2 for bad input, 3 for infeasible waveform synthesis, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::Infeasible { .. } => 3,
                CoreError::InvalidInput(_)
                | CoreError::Parse { .. }
                | CoreError::Io(_)
                | CoreError::NoWell { .. }
                | CoreError::Estimation(_)
                | CoreError::Unsupported(_) => 2,
                CoreError::Integration { .. } => 1,
            };
        }
        if cause.is::<InputError>() || cause.is::<std::io::Error>() || cause.is::<toml::de::Error>() {
            return 2;
        }
    }
    1
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
