//! Flag and `--config` merging plus parsers for list-valued flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dplab::adaptive::{linear_grid, ScheduleEntry};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Common {
    /// Directory for output files [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON object of option values; flags given on the command line win
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn config_object(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::invalid("config", "must be a JSON object")),
        Err(e) => Err(CliError::invalid("config", e.to_string())),
    }
}

/// Fills every option not given as a flag from the `--config` document.
pub fn resolve<T>(flags: T, config: Option<&Path>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned,
{
    let Some(path) = config else {
        return Ok(flags);
    };
    let from_file = config_object(path)?;
    let Value::Object(base) =
        serde_json::to_value(&flags).map_err(|e| CliError::Io(e.to_string()))?
    else {
        unreachable!("option structs serialize to objects")
    };
    let mut merged = base.clone();
    for (key, value) in &from_file {
        match merged.get(key) {
            None => return Err(CliError::invalid(key.clone(), "unknown option")),
            Some(Value::Null) => {
                merged.insert(key.clone(), value.clone());
            }
            Some(_) => {}
        }
    }
    serde_path_to_error::deserialize(Value::Object(merged.clone())).map_err(|e| {
        // Flattened groups hide the key from the error path; find it by
        // trying the file's values one at a time.
        let culprit = from_file.keys().find(|key| {
            let mut single = base.clone();
            single.insert((*key).clone(), merged[key.as_str()].clone());
            serde_json::from_value::<T>(Value::Object(single)).is_err()
        });
        let path = match culprit {
            Some(key) => key.clone(),
            None => e.path().to_string(),
        };
        CliError::invalid(path, e.into_inner().to_string())
    })
}

/// `start:stop:step`.
pub fn parse_grid(field: &str, text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::invalid(field, format!("expected start:stop:step, got {text:?}")));
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::invalid(field, e.to_string()))?;
    linear_grid(nums[0], nums[1], nums[2]).map_err(|e| match e {
        dplab::Error::Invalid { reason, .. } => CliError::invalid(field, reason),
        other => other.into(),
    })
}

pub fn parse_list<T: std::str::FromStr>(field: &str, text: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .enumerate()
        .map(|(i, s)| {
            s.trim()
                .parse::<T>()
                .map_err(|e| CliError::invalid(format!("{field}[{i}]"), e.to_string()))
        })
        .collect()
}

/// `time:b:r` entries separated by commas.
pub fn parse_schedule(text: &str) -> CliResult<Vec<ScheduleEntry>> {
    text.split(',')
        .enumerate()
        .map(|(i, item)| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(CliError::invalid(
                    format!("schedule[{i}]"),
                    format!("expected time:b:r, got {item:?}"),
                ));
            }
            let time = parts[0]
                .parse()
                .map_err(|e| CliError::invalid(format!("schedule[{i}].time"), format!("{e}")))?;
            let b = parts[1]
                .parse()
                .map_err(|e| CliError::invalid(format!("schedule[{i}].b"), format!("{e}")))?;
            let r = parts[2]
                .parse()
                .map_err(|e| CliError::invalid(format!("schedule[{i}].r"), format!("{e}")))?;
            Ok(ScheduleEntry { time, b, r })
        })
        .collect()
}

pub fn require_positive(field: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::invalid(field, format!("must be positive, got {v}")))
    }
}
