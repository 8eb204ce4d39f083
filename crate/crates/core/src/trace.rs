//! Grouping of timestamped log events into per-test-case symbol traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates::{TemplateId, TemplateTree, NONE_WORD};

/// Opaque identifier of one executed test case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TestId(pub u64);

/// One raw log line emitted by the system under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEvent {
    /// Nanoseconds since the start of the run.
    pub timestamp: u64,
    pub service: String,
    pub message: String,
}

/// Closed time interval `[start, end]` during which a test case ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionWindow {
    pub test_id: TestId,
    pub start: u64,
    pub end: u64,
}

impl ExecutionWindow {
    pub fn contains(&self, timestamp: u64) -> bool {
        self.start <= timestamp && timestamp <= self.end
    }

    fn overlaps(&self, other: &ExecutionWindow) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Template symbols emitted while one test case ran, in emission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub test_id: TestId,
    pub symbols: Vec<TemplateId>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("execution windows of tests {first:?} and {second:?} overlap")]
    OverlappingWindows { first: TestId, second: TestId },
    #[error("execution window of test {0:?} ends before it starts")]
    InvertedWindow(TestId),
}

/// Traces built from one batch of windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceBatch {
    /// One trace per window, in the order the windows were given.
    pub traces: Vec<Trace>,
    /// Events that fell outside every window.
    pub dropped_events: usize,
}

/// Assigns each event to the window containing its timestamp and maps the
/// messages to template symbols.
///
/// Events are expected in timestamp order; equal timestamps keep their input
/// order. Messages are fed to `tree` in chronological order, and an empty
/// window contributes the single `None` symbol at its position in time.
pub fn build_traces(
    events: &[LogEvent],
    windows: &[ExecutionWindow],
    tree: &mut TemplateTree,
) -> Result<TraceBatch, TraceError> {
    for w in windows {
        if w.start > w.end {
            return Err(TraceError::InvertedWindow(w.test_id));
        }
    }
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by_key(|&i| (windows[i].start, i));
    for pair in order.windows(2) {
        let (a, b) = (&windows[pair[0]], &windows[pair[1]]);
        if a.overlaps(b) {
            return Err(TraceError::OverlappingWindows {
                first: a.test_id,
                second: b.test_id,
            });
        }
    }

    let mut sorted: Vec<&LogEvent> = events.iter().collect();
    sorted.sort_by_key(|e| e.timestamp);

    let mut symbols: Vec<Vec<TemplateId>> = vec![Vec::new(); windows.len()];
    let mut dropped = 0;
    let mut cursor = 0;
    for &wi in &order {
        let w = &windows[wi];
        while cursor < sorted.len() && sorted[cursor].timestamp < w.start {
            dropped += 1;
            cursor += 1;
        }
        while cursor < sorted.len() && w.contains(sorted[cursor].timestamp) {
            symbols[wi].push(tree.ingest(&sorted[cursor].message));
            cursor += 1;
        }
        if symbols[wi].is_empty() {
            symbols[wi].push(tree.ingest(NONE_WORD));
        }
    }
    dropped += sorted.len() - cursor;

    let traces = windows
        .iter()
        .zip(symbols)
        .map(|(w, symbols)| Trace {
            test_id: w.test_id,
            symbols,
        })
        .collect();
    Ok(TraceBatch {
        traces,
        dropped_events: dropped,
    })
}
