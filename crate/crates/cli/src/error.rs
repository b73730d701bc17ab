//! Errors of the command-line layer and their exit codes.

use std::path::PathBuf;

use thiserror::Error;

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code when a bisection bracket does not straddle the threshold.
pub const EXIT_BRACKET: i32 = 3;
/// Exit code for solver, monitor and I/O failures.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(
        "bracket error: M = {m_lo} {} and M = {m_hi} {}; bisection needs a global run at the low mass and a blow-up at the high mass",
        outcome(*lo_detected),
        outcome(*hi_detected)
    )]
    Bracket { m_lo: f64, lo_detected: bool, m_hi: f64, hi_detected: bool },

    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: polarsim_core::Error,
    },

    #[error("inequality monitor violated in {context}: {detail}")]
    Monitor { context: String, detail: String },

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn outcome(detected: bool) -> &'static str {
    if detected {
        "blows up"
    } else {
        "stays global"
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Bracket { .. } => EXIT_BRACKET,
            _ => EXIT_FAILURE,
        }
    }

    pub(crate) fn solver(context: impl Into<String>) -> impl FnOnce(polarsim_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Solver { context, source }
    }
}
