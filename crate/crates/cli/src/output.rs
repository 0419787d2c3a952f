//! Output files. Reals in JSON are plain numbers except infinities, which
//! are written as the string `"inf"`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, CliResult};

pub fn real(v: f64) -> Value {
    if v.is_finite() {
        serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
    } else if v > 0.0 {
        Value::from("inf")
    } else if v < 0.0 {
        Value::from("-inf")
    } else {
        Value::from("nan")
    }
}

pub fn reals(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| real(v)).collect())
}

fn prepare(dir: &Path, name: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> CliResult<PathBuf> {
    let path = prepare(dir, name)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Writes whatever `body` produces into `dir/name`.
pub fn write_with<F>(dir: &Path, name: &str, body: F) -> CliResult<PathBuf>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let path = prepare(dir, name)?;
    let mut buf = Vec::new();
    body(&mut buf)?;
    let mut file = fs::File::create(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    file.write_all(&buf)?;
    Ok(path)
}
