use std::collections::{BTreeMap, BTreeSet};

use crate::api::TestCase;
use crate::exec::{ExecutionResult, FaultId, TargetId};
use crate::report::{SuiteTest, TestSuite};
use crate::trace::TestId;

#[derive(Debug, Clone)]
struct Entry {
    id: TestId,
    test: TestCase,
}

/// Best covering test per target and per fault seen so far in a run.
#[derive(Debug, Clone, Default)]
pub struct Archive {
    targets: BTreeMap<TargetId, Entry>,
    faults: BTreeMap<FaultId, Entry>,
}

fn offer<K: Ord + Clone>(map: &mut BTreeMap<K, Entry>, key: &K, id: TestId, test: &TestCase) {
    match map.get(key) {
        // strictly shorter replaces; equal length keeps the earlier test
        Some(e) if e.test.len() <= test.len() => {}
        _ => {
            map.insert(
                key.clone(),
                Entry {
                    id,
                    test: test.clone(),
                },
            );
        }
    }
}

impl Archive {
    pub fn update(&mut self, id: TestId, test: &TestCase, result: &ExecutionResult) {
        for t in &result.covered {
            offer(&mut self.targets, t, id, test);
        }
        for f in &result.faults {
            offer(&mut self.faults, f, id, test);
        }
    }

    pub fn covered(&self) -> BTreeSet<TargetId> {
        self.targets.keys().cloned().collect()
    }

    pub fn faults(&self) -> BTreeSet<FaultId> {
        self.faults.keys().cloned().collect()
    }

    pub fn covered_count(&self) -> usize {
        self.targets.len()
    }

    pub fn fault_count(&self) -> usize {
        self.faults.len()
    }

    pub fn covering_test(&self, target: &TargetId) -> Option<&TestCase> {
        self.targets.get(target).map(|e| &e.test)
    }

    /// The archived tests, each listed once with everything it is kept for,
    /// ordered by execution.
    pub fn suite(&self) -> Vec<SuiteTest> {
        let mut by_id: BTreeMap<TestId, SuiteTest> = BTreeMap::new();
        for (t, e) in &self.targets {
            by_id
                .entry(e.id)
                .or_insert_with(|| SuiteTest::new(e.id, &e.test))
                .covers
                .push(t.clone());
        }
        for (f, e) in &self.faults {
            by_id
                .entry(e.id)
                .or_insert_with(|| SuiteTest::new(e.id, &e.test))
                .faults
                .push(f.clone());
        }
        by_id.into_values().collect()
    }

    pub fn into_suite(self, scenario: &str, algorithm: &str, seed: u64) -> TestSuite {
        TestSuite::new(scenario, algorithm, seed, self.suite())
    }
}
