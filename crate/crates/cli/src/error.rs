use std::fmt;
use std::io;

use windbid::backtest::BacktestError;
use windbid::scenario::ScenarioError;
use windbid::solver::SolverError;

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, flags or input contents (exit 2).
    Usage(String),
    /// The solver refused the instance (exit 3).
    Refused(String),
    /// Input files or history are missing (exit 4).
    Missing(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Refused(_) => 3,
            CliError::Missing(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Refused(m) | CliError::Missing(m) => f.write_str(m),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_error(e: &io::Error, context: &str) -> CliError {
    if e.kind() == io::ErrorKind::NotFound {
        CliError::Missing(format!("{context}: {e}"))
    } else {
        CliError::Usage(format!("{context}: {e}"))
    }
}

pub fn read_context(context: &str) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| io_error(&e, context)
}

pub fn write_context(context: &str) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("cannot write {context}: {e}"))
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match &e {
            ScenarioError::Io(io) => io_error(io, "reading scenarios"),
            ScenarioError::MissingHistory { .. } => CliError::Missing(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NegativePrices { .. } | SolverError::TooLarge { .. } => CliError::Refused(e.to_string()),
            SolverError::Io(io) => CliError::Usage(format!("cannot write model: {io}")),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Strategy { source, date, hour } => {
                let inner = CliError::from(source);
                let wrap = |m: String| format!("{date} hour {hour}: {m}");
                match inner {
                    CliError::Usage(m) => CliError::Usage(wrap(m)),
                    CliError::Refused(m) => CliError::Refused(wrap(m)),
                    CliError::Missing(m) => CliError::Missing(wrap(m)),
                }
            }
            BacktestError::Io(io) => io_error(&io, "backtest input"),
            BacktestError::Scenario(s) => CliError::from(s),
            other => CliError::Usage(other.to_string()),
        }
    }
}
