//! Library side of the `cs-lab` binary: config parsing, CSV schemas, and the
//! subcommand implementations, kept callable so integration tests can drive
//! them without spawning processes.

pub mod commands;
pub mod config;
pub mod csv;

/// Exit codes: 0 success, 1 config error, 2 runtime error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Honor `CS_LAB_THREADS` if set; otherwise rayon picks machine parallelism.
/// Returns the configured worker count, or an error naming the variable.
pub fn configure_threads() -> Result<Option<usize>, config::ConfigError> {
    match std::env::var("CS_LAB_THREADS") {
        Err(_) => Ok(None),
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                config::ConfigError::new(
                    "CS_LAB_THREADS",
                    format!("expected a positive integer, got `{raw}`"),
                )
            })?;
            if n == 0 {
                return Err(config::ConfigError::new(
                    "CS_LAB_THREADS",
                    "expected a positive integer, got `0`",
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| config::ConfigError::new("CS_LAB_THREADS", e.to_string()))?;
            Ok(Some(n))
        }
    }
}
