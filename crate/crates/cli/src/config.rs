//! JSON run configuration. A config file holds the same keys as the
//! command-line flags (kebab-case); flags win over the file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Globals {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
}

const GLOBAL_KEYS: [&str; 4] = ["seed", "workers", "format", "output"];

/// A parsed config file, split into global and subcommand keys.
#[derive(Debug, Default)]
pub struct ConfigFile {
    pub globals: Globals,
    pub command: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path, subcommand: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, subcommand)
    }

    pub fn parse(text: &str, subcommand: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
        let Value::Object(mut map) = value else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        if let Some(cmd) = map.remove("command") {
            if cmd.as_str() != Some(subcommand) {
                return Err(CliError::Config(format!("field `command`: config is for {cmd}, not `{subcommand}`")));
            }
        }
        let mut globals = Map::new();
        for key in GLOBAL_KEYS {
            if let Some(v) = map.remove(key) {
                globals.insert(key.to_string(), v);
            }
        }
        let globals = serde_json::from_value(Value::Object(globals)).map_err(|e| CliError::Config(format!("config: {e}")))?;
        Ok(Self { globals, command: map })
    }
}

fn without_nulls(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

/// Overlay the flags in `cli` on top of the config keys and deserialize;
/// unknown or mistyped keys produce an error naming the field.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, config: &Map<String, Value>) -> Result<T, CliError> {
    let mut merged = config.clone();
    let flags = serde_json::to_value(cli).map_err(|e| CliError::Config(e.to_string()))?;
    merged.extend(without_nulls(flags));
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("config: {e}")))
}

pub fn merge_globals(cli: &Globals, config: &Globals) -> Globals {
    Globals {
        seed: cli.seed.or(config.seed),
        workers: cli.workers.or(config.workers),
        format: cli.format.or(config.format),
        output: cli.output.clone().or_else(|| config.output.clone()),
    }
}

/// Fail with a message naming both the flag and the config key.
pub fn required<T: Clone>(value: &Option<T>, field: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| CliError::Config(format!("missing required field `{field}` (flag --{field} or config key \"{field}\")")))
}
