use std::path::PathBuf;

use clap::{Args, Parser};
use ocon_core::checkpoint::Checkpoint;
use ocon_core::profiling::{emit_csv, measure, EnergyModel, ModelSize};

use super::RunInfo;
use crate::error::{core, CliError};
use crate::{Cli, Command};

/// Runs another subcommand and writes its wall time, model size and
/// estimated energy use and CO2 emissions as CSV.
///
/// Powers and carbon intensity default to 42.5 W CPU, 4.7543 W RAM and
/// 0.2857 kg/kWh; override with OCON_CPU_POWER_W, OCON_RAM_POWER_W and
/// OCON_CARBON_INTENSITY.
#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Energy CSV; defaults to `emissions.csv` in the wrapped command's
    /// output directory, or the current directory.
    #[arg(long, value_name = "PATH")]
    pub emissions: Option<PathBuf>,
    /// Add a row instead of overwriting.
    #[arg(long)]
    pub append: bool,
    /// The wrapped subcommand and its arguments.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, required = true, value_name = "COMMAND")]
    pub command: Vec<String>,
}

pub fn run(args: &ProfileArgs) -> Result<RunInfo, CliError> {
    let meter = EnergyModel::from_env().map_err(core)?;
    let inner = Cli::try_parse_from(std::iter::once("ocon".to_string()).chain(args.command.iter().cloned()))
        .map_err(|e| CliError::usage(e.to_string().trim_end()))?;
    if matches!(inner.command, Command::Profile(_)) {
        return Err(CliError::usage("profile cannot wrap itself"));
    }
    let (result, profile) = measure(
        || crate::dispatch(&inner.command),
        &meter,
        |r| {
            r.as_ref()
                .ok()
                .and_then(|i| i.checkpoint.as_ref())
                .and_then(|dir| Checkpoint::load(dir).ok())
                .map(|c| ModelSize::of_ensemble(&c.ensemble))
                .unwrap_or_default()
        },
    );
    let out_dir = result.as_ref().ok().and_then(|i| i.out.clone());
    let path = args
        .emissions
        .clone()
        .unwrap_or_else(|| out_dir.unwrap_or_default().join("emissions.csv"));
    emit_csv(&profile, &path, args.append).map_err(core)?;
    eprintln!(
        "profile: {:.2} s, {:.3e} kWh, {:.3e} kg CO2, {} params -> {}",
        profile.duration_s,
        profile.total_kwh,
        profile.emissions_kg,
        profile.params,
        path.display()
    );
    result
}
