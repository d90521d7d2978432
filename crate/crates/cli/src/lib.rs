//! Batch front end: configuration, scenarios and artifacts.

pub mod config;
pub mod error;
pub mod presets;
pub mod scenarios;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
pub use scenarios::{run, Scenario, ScenarioResult};

/// Environment variable holding the worker count of the global pool.
pub const WORKERS_ENV: &str = "INCLUSION_LAB_WORKERS";

/// Sizes the global rayon pool from [`WORKERS_ENV`] when it is set.
pub fn init_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| CliError::Config {
        field: WORKERS_ENV.into(),
        message: format!("expected a positive integer, found {raw:?}"),
    })?;
    if n == 0 {
        return Err(CliError::Config {
            field: WORKERS_ENV.into(),
            message: "worker count must be positive".into(),
        });
    }
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Loads a config from `--config` or a preset name.
pub fn load_config(preset: Option<&str>, path: Option<&std::path::Path>) -> Result<RunConfig, CliError> {
    let text = match (preset, path) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config {
                field: String::new(),
                message: "give either a preset or --config, not both".into(),
            })
        }
        (Some(name), None) => presets::preset(name).ok_or_else(|| CliError::UnknownPreset(name.into()))?,
        (None, Some(p)) => std::fs::read_to_string(p).map_err(|e| CliError::Config {
            field: String::new(),
            message: format!("cannot read {}: {e}", p.display()),
        })?,
        (None, None) => {
            return Err(CliError::Config {
                field: String::new(),
                message: "a preset name or --config is required".into(),
            })
        }
    };
    parse_config(&text)
}
