//! Wall time, model size and a constant-power energy / CO2 estimate,
//! written as a CodeCarbon-style CSV.

use std::fs::OpenOptions;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ocon::OconEnsemble;

pub const DEFAULT_CPU_POWER_W: f64 = 42.5;
pub const DEFAULT_RAM_POWER_W: f64 = 4.7543;
/// kg CO2 per kWh that turns a 36-minute run at the default powers into
/// 3.75e-6 kg/s: `0.0081 kg / 0.02835 kWh`.
pub const DEFAULT_CARBON_INTENSITY: f64 = 0.2857;

pub const ENV_CPU_POWER: &str = "OCON_CPU_POWER_W";
pub const ENV_RAM_POWER: &str = "OCON_RAM_POWER_W";
pub const ENV_CARBON_INTENSITY: &str = "OCON_CARBON_INTENSITY";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid energy model: {0}")]
    InvalidModel(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Source of energy figures for a run of known length. [`EnergyModel`] is
/// the constant-power implementation; hardware counters can implement it
/// too.
pub trait EnergyMeter {
    /// `(cpu_kwh, ram_kwh)` consumed over `seconds`.
    fn energy_kwh(&self, seconds: f64) -> (f64, f64);
    fn carbon_intensity(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub cpu_power_watts: f64,
    pub ram_power_watts: f64,
    pub carbon_intensity_kg_per_kwh: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            cpu_power_watts: DEFAULT_CPU_POWER_W,
            ram_power_watts: DEFAULT_RAM_POWER_W,
            carbon_intensity_kg_per_kwh: DEFAULT_CARBON_INTENSITY,
        }
    }
}

/// `W * h / 1000`.
pub fn kwh(watts: f64, seconds: f64) -> f64 {
    watts * (seconds / 3600.0) / 1000.0
}

impl EnergyModel {
    /// Defaults, overridden by any of `OCON_CPU_POWER_W`, `OCON_RAM_POWER_W`
    /// and `OCON_CARBON_INTENSITY` that are set.
    pub fn from_env() -> Result<Self, ProfileError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ProfileError> {
        let mut m = Self::default();
        for (key, slot) in [
            (ENV_CPU_POWER, &mut m.cpu_power_watts),
            (ENV_RAM_POWER, &mut m.ram_power_watts),
            (ENV_CARBON_INTENSITY, &mut m.carbon_intensity_kg_per_kwh),
        ] {
            if let Some(v) = get(key) {
                *slot = v
                    .trim()
                    .parse()
                    .map_err(|_| ProfileError::InvalidModel(format!("{key}={v:?} is not a number")))?;
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        for (name, v) in [
            ("cpu_power_watts", self.cpu_power_watts),
            ("ram_power_watts", self.ram_power_watts),
            ("carbon_intensity_kg_per_kwh", self.carbon_intensity_kg_per_kwh),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ProfileError::InvalidModel(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

impl EnergyMeter for EnergyModel {
    fn energy_kwh(&self, seconds: f64) -> (f64, f64) {
        (kwh(self.cpu_power_watts, seconds), kwh(self.ram_power_watts, seconds))
    }

    fn carbon_intensity(&self) -> f64 {
        self.carbon_intensity_kg_per_kwh
    }
}

/// Static size figures of the profiled model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSize {
    pub params: usize,
    /// Parameters stored as f64.
    pub model_bytes: usize,
    /// Multiply-adds of one inference.
    pub muladds: usize,
}

impl ModelSize {
    pub fn of_ensemble(e: &OconEnsemble) -> Self {
        let params: usize = e.nets.iter().map(|n| n.count_params()).sum();
        ModelSize {
            params,
            model_bytes: params * std::mem::size_of::<f64>(),
            muladds: e.nets.iter().map(|n| n.count_muladds()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub timestamp: String,
    pub duration_s: f64,
    pub cpu_kwh: f64,
    pub ram_kwh: f64,
    pub total_kwh: f64,
    pub emissions_kg: f64,
    pub emission_rate_kg_s: f64,
    pub params: usize,
    pub model_bytes: usize,
    pub muladds: usize,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "timestamp",
    "duration_s",
    "cpu_kwh",
    "ram_kwh",
    "total_kwh",
    "emissions_kg",
    "emission_rate_kg_s",
    "params",
    "model_bytes",
    "muladds",
];

/// Profile of a run that lasted `seconds`.
pub fn profile_for_duration(meter: &impl EnergyMeter, seconds: f64, size: ModelSize) -> EnergyProfile {
    let (cpu, ram) = meter.energy_kwh(seconds);
    let total = cpu + ram;
    let emissions = total * meter.carbon_intensity();
    EnergyProfile {
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        duration_s: seconds,
        cpu_kwh: cpu,
        ram_kwh: ram,
        total_kwh: total,
        emissions_kg: emissions,
        emission_rate_kg_s: if seconds > 0.0 { emissions / seconds } else { 0.0 },
        params: size.params,
        model_bytes: size.model_bytes,
        muladds: size.muladds,
    }
}

/// Runs `run` under a monotonic clock and profiles it. The size figures
/// come from the returned value through `size`.
pub fn measure<T>(run: impl FnOnce() -> T, meter: &impl EnergyMeter, size: impl FnOnce(&T) -> ModelSize) -> (T, EnergyProfile) {
    let start = Instant::now();
    let out = run();
    let secs = start.elapsed().as_secs_f64();
    let s = size(&out);
    (out, profile_for_duration(meter, secs, s))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ProfileError {
    ProfileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes the header and one row, or with `append` adds a row to an
/// existing file (writing the header only if the file is empty).
pub fn emit_csv(profile: &EnergyProfile, path: impl AsRef<Path>, append: bool) -> Result<(), ProfileError> {
    let path = path.as_ref();
    let has_rows = append && std::fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false);
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(!has_rows).from_writer(file);
    w.serialize(profile).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<EnergyProfile>, ProfileError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    if header != CSV_COLUMNS {
        return Err(io_err(path, format!("unexpected columns {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(|e| io_err(path, e))).collect()
}
