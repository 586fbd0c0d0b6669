/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

pub mod eval;
pub mod infer;
pub mod ingest;
pub mod profile;
pub mod search;
pub mod train;

use std::path::PathBuf;

use crate::error::CliError;

pub const SEED_ENV: &str = "OCON_SEED";
pub const DEFAULT_SEED: u64 = 0;

/// What a finished command leaves behind, for `profile`.
#[derive(Debug, Default)]
pub struct RunInfo {
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Flag, then config file, then `OCON_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

pub fn resolve_jobs(flag: Option<usize>, file: Option<usize>) -> Result<usize, CliError> {
    match flag.or(file) {
        Some(0) => Err(CliError::usage("--jobs must be at least 1")),
        Some(j) => Ok(j),
        None => Ok(ocon_core::trainer::default_jobs()),
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}
