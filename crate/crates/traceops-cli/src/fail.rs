//! Process-level failure classification.
//!
//! Every command maps its outcome onto one of four exit codes:
//! `0` pass/success, `1` check failure (the experiment ran and refuted the
//! property under test), `2` usage or configuration error, `3` inconclusive
//! (a Monte-Carlo or adaptive budget was too small to decide).

use std::process::ExitCode;

#[derive(Debug)]
pub enum Failure {
    /// The check ran and failed → exit 1.
    Check(String),
    /// Bad invocation, config, parameters, or I/O → exit 2.
    Usage(String),
    /// The budget could not decide the check → exit 3.
    Inconclusive(String),
}

impl Failure {
    pub fn report(self) -> ExitCode {
        match self {
            Failure::Check(msg) => {
                eprintln!("check failed: {msg}");
                ExitCode::from(1)
            }
            Failure::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            Failure::Inconclusive(msg) => {
                eprintln!("inconclusive: {msg}");
                ExitCode::from(3)
            }
        }
    }
}

/// Library errors default to usage errors except for the budget-limited
/// classes, which are inconclusive rather than wrong. Commands intercept
/// the errors that constitute a *negative check result* (e.g. a kernel
/// that is provably not extendable) and convert them to `Check` instead.
impl From<traceops::Error> for Failure {
    fn from(e: traceops::Error) -> Self {
        use traceops::Error;
        match &e {
            Error::Budget(_)
            | Error::Inconclusive(_)
            | Error::Truncation(_)
            | Error::RangeTooSmall { .. } => Failure::Inconclusive(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;
