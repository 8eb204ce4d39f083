//! On-disk artifacts of a run: the generated test suite (JSON) and the
//! coverage-over-time report (CSV).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::api::{RestCall, TestCase};
use crate::exec::{FaultId, TargetId};
use crate::trace::TestId;

pub const SUITE_SCHEMA_VERSION: u32 = 1;
pub const REPORT_HEADER: &str = "elapsed_s,generation,covered_targets,faults";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot access `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed suite file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported suite schema_version {0}")]
    Version(u32),
    #[error("malformed report line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// One archived test together with what it was kept for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteTest {
    /// Execution order within the run that produced it.
    pub id: u64,
    #[serde(default)]
    pub covers: Vec<TargetId>,
    #[serde(default)]
    pub faults: Vec<FaultId>,
    pub calls: Vec<RestCall>,
}

impl SuiteTest {
    pub fn new(id: TestId, test: &TestCase) -> Self {
        Self {
            id: id.0,
            covers: Vec::new(),
            faults: Vec::new(),
            calls: test.calls.clone(),
        }
    }

    pub fn test_case(&self) -> TestCase {
        TestCase {
            calls: self.calls.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub schema_version: u32,
    pub scenario: String,
    pub algorithm: String,
    pub seed: u64,
    pub tests: Vec<SuiteTest>,
}

impl TestSuite {
    pub fn new(scenario: &str, algorithm: &str, seed: u64, tests: Vec<SuiteTest>) -> Self {
        Self {
            schema_version: SUITE_SCHEMA_VERSION,
            scenario: scenario.to_string(),
            algorithm: algorithm.to_string(),
            seed,
            tests,
        }
    }

    pub fn covered(&self) -> BTreeSet<TargetId> {
        self.tests
            .iter()
            .flat_map(|t| t.covers.iter().cloned())
            .collect()
    }

    pub fn faults(&self) -> BTreeSet<FaultId> {
        self.tests
            .iter()
            .flat_map(|t| t.faults.iter().cloned())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let suite: TestSuite = serde_json::from_str(text)?;
        if suite.schema_version != SUITE_SCHEMA_VERSION {
            return Err(ReportError::Version(suite.schema_version));
        }
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        Self::from_json(&read(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSample {
    pub elapsed_s: f64,
    pub generation: u64,
    pub covered_targets: usize,
    pub faults: usize,
}

/// Summary of one search run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub algorithm: String,
    pub seed: u64,
    pub samples: Vec<CoverageSample>,
    pub generations: u64,
    pub evaluations: u64,
    pub covered: BTreeSet<TargetId>,
    pub faults: BTreeSet<FaultId>,
    pub model_states: usize,
    pub templates: usize,
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        samples_to_csv(&self.samples)
    }

    /// The last sample taken at or before `generation`.
    pub fn at_generation(&self, generation: u64) -> Option<&CoverageSample> {
        self.samples
            .iter()
            .rev()
            .find(|s| s.generation <= generation)
    }
}

pub fn samples_to_csv(samples: &[CoverageSample]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{:.6},{},{},{}",
            s.elapsed_s, s.generation, s.covered_targets, s.faults
        );
    }
    out
}

pub fn samples_from_csv(text: &str) -> Result<Vec<CoverageSample>, ReportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == REPORT_HEADER => {}
        _ => {
            return Err(ReportError::Csv {
                line: 1,
                reason: format!("expected header `{REPORT_HEADER}`"),
            })
        }
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| ReportError::Csv {
            line: i + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        let [elapsed, generation, covered, faults] = fields[..] else {
            return Err(bad("expected 4 fields"));
        };
        samples.push(CoverageSample {
            elapsed_s: elapsed.parse().map_err(|_| bad("elapsed_s"))?,
            generation: generation.parse().map_err(|_| bad("generation"))?,
            covered_targets: covered.parse().map_err(|_| bad("covered_targets"))?,
            faults: faults.parse().map_err(|_| bad("faults"))?,
        });
    }
    Ok(samples)
}

pub fn read(path: &Path) -> Result<String, ReportError> {
    std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}
