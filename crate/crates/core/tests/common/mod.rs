#![allow(dead_code)]

pub mod rank_sum_cases;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use mish_core::automaton::{Automaton, StateId};
use mish_core::templates::TemplateId;
use mish_core::trace::{TestId, Trace};

pub fn trace(symbols: &[u32]) -> Trace {
    Trace {
        test_id: TestId(0),
        symbols: symbols.iter().map(|&s| TemplateId(s)).collect(),
    }
}

/// Checks the structural invariants of a model from its public view,
/// without going through `Automaton::validate`.
pub fn check_invariants(model: &Automaton, ingested: &[Vec<u32>]) -> Result<(), String> {
    let ids: BTreeSet<StateId> = model.state_ids().collect();
    if !ids.contains(&StateId::ROOT) {
        return Err("no root".into());
    }

    let mut incoming: BTreeMap<StateId, u64> = BTreeMap::new();
    for &s in &ids {
        let mut seen = BTreeSet::new();
        let mut out = 0;
        for (symbol, edge) in model.edges(s) {
            if !seen.insert(symbol) {
                return Err(format!("state {s} has two edges on {symbol}"));
            }
            if !ids.contains(&edge.target) {
                return Err(format!("edge {s} -> {} dangles", edge.target));
            }
            *incoming.entry(edge.target).or_default() += edge.count;
            out += edge.count;
        }
        if out > model.visits(s).unwrap() {
            return Err(format!("state {s} emits more than it receives"));
        }
    }

    let mut reached = BTreeSet::from([StateId::ROOT]);
    let mut queue = VecDeque::from([StateId::ROOT]);
    while let Some(s) = queue.pop_front() {
        for (_, e) in model.edges(s) {
            if reached.insert(e.target) {
                queue.push_back(e.target);
            }
        }
    }
    if reached != ids {
        return Err("unreachable states".into());
    }

    let symbols: u64 = ingested.iter().map(|t| t.len() as u64).sum();
    let non_root: u64 = ids
        .iter()
        .filter(|&&s| s != StateId::ROOT)
        .map(|&s| model.visits(s).unwrap())
        .sum();
    if non_root != symbols || model.total_symbols() != symbols {
        return Err(format!("mass {non_root} vs {symbols} symbols"));
    }
    if model.visits(StateId::ROOT) != Some(ingested.len() as u64) {
        return Err("root visits differ from trace count".into());
    }
    for &s in ids.iter().filter(|&&s| s != StateId::ROOT) {
        let inc = incoming.get(&s).copied().unwrap_or(0);
        if inc != model.visits(s).unwrap() {
            return Err(format!("state {s}: {inc} in, {:?} visits", model.visits(s)));
        }
    }
    for t in ingested {
        let symbols: Vec<TemplateId> = t.iter().map(|&s| TemplateId(s)).collect();
        model
            .replay(&symbols)
            .map_err(|e| format!("ingested trace {t:?} no longer replays: {e}"))?;
    }
    Ok(())
}

/// Prefix tree of `traces`: for every non-empty prefix, the number of traces
/// that start with it.
pub fn prefix_counts(traces: &[Vec<u32>]) -> BTreeMap<Vec<u32>, u64> {
    let mut counts = BTreeMap::new();
    for t in traces {
        for n in 1..=t.len() {
            *counts.entry(t[..n].to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Compares a merge-free model against the prefix tree of its input.
pub fn matches_prefix_tree(model: &Automaton, traces: &[Vec<u32>]) -> Result<(), String> {
    let counts = prefix_counts(traces);
    if model.state_count() != counts.len() + 1 {
        return Err(format!(
            "{} states, prefix tree has {}",
            model.state_count(),
            counts.len() + 1
        ));
    }
    if model.visits(StateId::ROOT) != Some(traces.len() as u64) {
        return Err("root visits".into());
    }
    let mut seen = BTreeSet::new();
    for (prefix, &count) in &counts {
        let symbols: Vec<TemplateId> = prefix.iter().map(|&s| TemplateId(s)).collect();
        let path = model
            .replay(&symbols)
            .map_err(|e| format!("prefix {prefix:?}: {e}"))?;
        let last = *path.0.last().unwrap();
        if !seen.insert(last) {
            return Err(format!("prefix {prefix:?} shares state {last}"));
        }
        if model.visits(last) != Some(count) {
            return Err(format!(
                "prefix {prefix:?}: visits {:?}, expected {count}",
                model.visits(last)
            ));
        }
    }
    Ok(())
}
