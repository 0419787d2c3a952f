use std::fmt;
use std::process::ExitCode;

/// Failure of a subcommand, mapped onto the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad input; `path` names the first offending field.
    Invalid { path: String, reason: String },
    NonConvergence { iterations: usize, residual: f64 },
    /// A checked invariant does not hold on the computed results.
    Violation(String),
    Io(String),
}

impl CliError {
    pub fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Invalid { .. } => 2,
            CliError::NonConvergence { .. } => 3,
            CliError::Violation(_) | CliError::Io(_) => 1,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid { path, reason } => write!(f, "invalid {path}: {reason}"),
            CliError::NonConvergence {
                iterations,
                residual,
            } => write!(
                f,
                "no convergence after {iterations} iterations, residual {residual:e}"
            ),
            CliError::Violation(msg) => write!(f, "check failed: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl From<dplab::Error> for CliError {
    fn from(e: dplab::Error) -> Self {
        match e {
            dplab::Error::Invalid { path, reason } => CliError::Invalid { path, reason },
            dplab::Error::UnstableBase(msg) => CliError::invalid("base", format!("unstable: {msg}")),
            dplab::Error::OutsideStabilityRegion(k) => {
                CliError::invalid("k0", format!("{k} is outside the region of stability"))
            }
            dplab::Error::NonConvergence {
                iterations,
                residual,
            } => CliError::NonConvergence {
                iterations,
                residual,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
