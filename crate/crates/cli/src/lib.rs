//! Library behind the `csma` binary: plan parsing, sweeps, exact analysis,
//! verification suites and threshold evaluation.

pub mod analyze;
pub mod config;
pub mod simulate;
pub mod suites;
pub mod thresholds;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for verification and run-time failures, 2 for configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O error: {e}"))
    }
}

/// `--workers`, else `CSMA_WORKERS`, else the available parallelism.
pub fn resolve_workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return if w == 0 {
            Err(CliError::Config("--workers must be at least 1".into()))
        } else {
            Ok(w)
        };
    }
    if let Ok(v) = std::env::var("CSMA_WORKERS") {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(CliError::Config(format!("CSMA_WORKERS must be a positive integer, got {v:?}"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
