//! The contract between the search engine and whatever runs test cases.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::api::TestCase;
use crate::trace::{ExecutionWindow, LogEvent, TestId};

/// Coverage target identifier, e.g. `orders:admin:list`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetId(pub String);

/// Identifier of a server error, e.g. `audit:export:500`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultId(pub String);

impl fmt::Display for TargetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for FaultId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Outcome of one call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallStatus {
    Http(u16),
    Timeout,
    ConnectionFailed,
}

impl fmt::Display for CallStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallStatus::Http(code) => write!(f, "{code}"),
            CallStatus::Timeout => f.write_str("timeout"),
            CallStatus::ConnectionFailed => f.write_str("connection-failed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub statuses: Vec<CallStatus>,
    /// Strictly increasing timestamps, all inside `window`.
    pub events: Vec<LogEvent>,
    pub covered: BTreeSet<TargetId>,
    pub faults: BTreeSet<FaultId>,
    pub window: ExecutionWindow,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("test case calls unknown endpoint `{0}`")]
    UnknownEndpoint(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Runs test cases one at a time against a system under test.
pub trait Executor {
    fn execute(&mut self, test: &TestCase, id: TestId) -> Result<ExecutionResult, ExecError>;

    /// Clears cross-test state. Calling it twice is the same as once.
    fn reset(&mut self);

    /// Seconds on the executor's own clock since it was created.
    fn elapsed_s(&self) -> f64;
}
