//! Configuration files: loading with validation, canonical rendering and
//! atomic persistence.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::events::EventType;
use crate::pattern::{PatternRef, PlaybackParams};
use crate::scheduler::{
    validate_config, ConfigError, EventConfig, SchedulerConfig, ValidConfig, TICK_MS,
};

pub const DEFAULT_CONFIG_PATH: &str = "supervisor.json";

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("{} is not a configuration document: {source}", path.display())]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{} is invalid ({}): {source}", path.display(), source.code())]
    Invalid { path: PathBuf, source: ConfigError },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
}

/// Four slots covering every event type for the default fleet.
pub fn default_config() -> SchedulerConfig {
    let robots: std::collections::BTreeSet<String> = ["bingo", "rat"].map(String::from).into();
    let slot = |slot, event_type, pattern: &str, params| EventConfig {
        slot,
        event_type,
        robots: robots.clone(),
        pattern: PatternRef::Predefined(pattern.into()),
        params,
    };
    SchedulerConfig {
        tick_ms: TICK_MS,
        events: vec![
            slot(
                1,
                EventType::EstopEnabled,
                "pulse_matrix",
                PlaybackParams {
                    reps: 3,
                    realert_delay_ms: 3000,
                    step_ms: 200,
                    intensity_pct: 100,
                    ..PlaybackParams::default()
                },
            ),
            slot(
                2,
                EventType::Error,
                "circular",
                PlaybackParams {
                    reps: 2,
                    step_ms: 150,
                    ..PlaybackParams::default()
                },
            ),
            slot(
                3,
                EventType::BatteryLow,
                "moving_rows",
                PlaybackParams {
                    realert_delay_ms: 10_000,
                    ..PlaybackParams::default()
                },
            ),
            slot(
                4,
                EventType::Idle,
                "pulse_bottom",
                PlaybackParams {
                    realert: false,
                    intensity_pct: 60,
                    ..PlaybackParams::default()
                },
            ),
        ],
    }
}

/// Pretty JSON with a trailing newline. Equal configs render to equal bytes.
pub fn canonical_json(config: &SchedulerConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serializes");
    s.push('\n');
    s
}

pub fn load_config(path: &Path) -> Result<ValidConfig, ConfigFileError> {
    let bytes = std::fs::read(path).map_err(|source| ConfigFileError::Read {
        path: path.to_owned(),
        source,
    })?;
    let config: SchedulerConfig =
        serde_json::from_slice(&bytes).map_err(|source| ConfigFileError::Parse {
            path: path.to_owned(),
            source,
        })?;
    validate_config(&config).map_err(|source| ConfigFileError::Invalid {
        path: path.to_owned(),
        source,
    })
}

/// Like [`load_config`], but a missing file yields [`default_config`].
pub fn load_or_default(path: &Path) -> Result<ValidConfig, ConfigFileError> {
    match load_config(path) {
        Err(ConfigFileError::Read { source, .. }) if source.kind() == io::ErrorKind::NotFound => {
            tracing::info!(
                "{} not found, using the default configuration",
                path.display()
            );
            Ok(validate_config(&default_config()).expect("default config is valid"))
        }
        other => other,
    }
}

/// Writes a sibling temporary file and renames it over `path`, so readers
/// never observe a partial document.
pub fn save_config(path: &Path, config: &SchedulerConfig) -> Result<(), ConfigFileError> {
    let err = |source| ConfigFileError::Write {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| err(io::ErrorKind::InvalidInput.into()))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut file = std::fs::File::create(&tmp).map_err(err)?;
    file.write_all(canonical_json(config).as_bytes())
        .map_err(err)?;
    file.sync_all().map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}
