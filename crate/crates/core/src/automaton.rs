//! Frequency-annotated deterministic automaton learned from a stream of
//! traces by state merging.
//!
//! Every state is accepting. Each state carries the number of times a trace
//! entered it, and each transition the number of times it was taken. Batches
//! of traces first extend the model as a prefix tree; the fresh part of the
//! tree is then folded into the established core with a red-blue merge loop
//! driven by a Hoeffding-bound compatibility test on outgoing frequencies.
//!
//! The root counts one visit per trace and is never merged, so the visit
//! counts of all other states always sum to the number of symbols seen.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::templates::TemplateId;
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    pub const ROOT: StateId = StateId(0);
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parameters of the streaming learner.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Significance level of the compatibility test.
    pub alpha: f64,
    /// States seen fewer times than this are not merge candidates, and
    /// inside a compatibility check they never reject a merge.
    pub min_count: u64,
    /// With merging off the model is the plain prefix tree of the stream.
    pub merging: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            min_count: 10,
            merging: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub target: StateId,
    pub count: u64,
}

#[derive(Debug, Clone, Default)]
struct State {
    visits: u64,
    edges: BTreeMap<TemplateId, Edge>,
    core: bool,
}

impl State {
    fn outgoing(&self) -> u64 {
        self.edges.values().map(|e| e.count).sum()
    }

    fn ends(&self) -> u64 {
        self.visits - self.outgoing()
    }
}

/// States visited by a replayed trace, root excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path(pub Vec<StateId>);

impl Path {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("no transition for symbol at position {position}")]
    UnknownTransition { position: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvariantViolation {
    #[error("edge {from} --{symbol}--> {target} points at a missing state")]
    DanglingEdge {
        from: StateId,
        symbol: TemplateId,
        target: StateId,
    },
    #[error("state {0} is unreachable from the root")]
    Unreachable(StateId),
    #[error("root visits {root} differ from trace count {traces}")]
    RootVisits { root: u64, traces: u64 },
    #[error("non-root visits sum to {sum}, expected {symbols} symbols")]
    MassConservation { sum: u64, symbols: u64 },
    #[error("state {state} has {visits} visits but {incoming} incoming")]
    LocalFlow {
        state: StateId,
        visits: u64,
        incoming: u64,
    },
    #[error("state {0} emits more transitions than it was visited")]
    Overflow(StateId),
    #[error("root is missing")]
    MissingRoot,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelParseError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("model violates an invariant: {0}")]
    Invalid(#[from] InvariantViolation),
}

/// Bookkeeping returned by one [`Automaton::ingest_batch`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchStats {
    pub created: usize,
    pub merged: usize,
    pub promoted: usize,
}

/// The learned behavior model.
#[derive(Debug, Clone)]
pub struct Automaton {
    config: LearnerConfig,
    states: BTreeMap<StateId, State>,
    next_id: u32,
    alphabet: BTreeSet<TemplateId>,
    total_symbols: u64,
    total_traces: u64,
}

impl Default for Automaton {
    fn default() -> Self {
        Self::new(LearnerConfig::default())
    }
}

impl Automaton {
    pub fn new(config: LearnerConfig) -> Self {
        let mut states = BTreeMap::new();
        states.insert(
            StateId::ROOT,
            State {
                core: true,
                ..State::default()
            },
        );
        Self {
            config,
            states,
            next_id: 1,
            alphabet: BTreeSet::new(),
            total_symbols: 0,
            total_traces: 0,
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> + '_ {
        self.states.keys().copied()
    }

    pub fn visits(&self, state: StateId) -> Option<u64> {
        self.states.get(&state).map(|s| s.visits)
    }

    pub fn edges(&self, state: StateId) -> impl Iterator<Item = (TemplateId, Edge)> + '_ {
        self.states
            .get(&state)
            .into_iter()
            .flat_map(|s| s.edges.iter().map(|(k, v)| (*k, *v)))
    }

    pub fn transition(&self, state: StateId, symbol: TemplateId) -> Option<Edge> {
        self.states.get(&state)?.edges.get(&symbol).copied()
    }

    pub fn alphabet(&self) -> &BTreeSet<TemplateId> {
        &self.alphabet
    }

    pub fn total_symbols(&self) -> u64 {
        self.total_symbols
    }

    pub fn total_traces(&self) -> u64 {
        self.total_traces
    }

    /// Folds a batch of traces into the model: prefix-tree extension
    /// followed by one merge pass over the not-yet-established states.
    pub fn ingest_batch(&mut self, traces: &[Trace]) -> BatchStats {
        let mut stats = BatchStats::default();
        for trace in traces {
            self.total_traces += 1;
            self.state_mut(StateId::ROOT).visits += 1;
            let mut current = StateId::ROOT;
            for &symbol in &trace.symbols {
                self.alphabet.insert(symbol);
                self.total_symbols += 1;
                let next = match self.state_mut(current).edges.get_mut(&symbol) {
                    Some(edge) => {
                        edge.count += 1;
                        edge.target
                    }
                    None => {
                        let fresh = StateId(self.next_id);
                        self.next_id += 1;
                        self.states.insert(fresh, State::default());
                        self.state_mut(current).edges.insert(
                            symbol,
                            Edge {
                                target: fresh,
                                count: 1,
                            },
                        );
                        stats.created += 1;
                        fresh
                    }
                };
                self.state_mut(next).visits += 1;
                current = next;
            }
        }
        if self.config.merging {
            self.merge_pass(&mut stats);
        }
        stats
    }

    fn state_mut(&mut self, id: StateId) -> &mut State {
        self.states.get_mut(&id).expect("state id is live")
    }

    fn merge_pass(&mut self, stats: &mut BatchStats) {
        while let Some((parent, symbol, blue)) = self.next_candidate() {
            let red = self
                .states
                .iter()
                .filter(|(&id, s)| s.core && id != StateId::ROOT)
                .map(|(&id, _)| id)
                .find(|&red| self.compatible(red, blue));
            match red {
                Some(red) => {
                    self.state_mut(parent)
                        .edges
                        .get_mut(&symbol)
                        .expect("candidate edge")
                        .target = red;
                    self.fold(red, blue);
                    stats.merged += 1;
                }
                None => {
                    self.state_mut(blue).core = true;
                    stats.promoted += 1;
                }
            }
        }
    }

    /// First non-core child of a core state, in breadth-first order, that
    /// has enough visits to be judged.
    fn next_candidate(&self) -> Option<(StateId, TemplateId, StateId)> {
        let mut queue = VecDeque::from([StateId::ROOT]);
        let mut seen = HashSet::from([StateId::ROOT]);
        while let Some(id) = queue.pop_front() {
            for (&symbol, edge) in &self.states[&id].edges {
                let child = &self.states[&edge.target];
                if child.core {
                    if seen.insert(edge.target) {
                        queue.push_back(edge.target);
                    }
                } else if child.visits >= self.config.min_count {
                    return Some((id, symbol, edge.target));
                }
            }
        }
        None
    }

    fn different(&self, n1: u64, f1: u64, n2: u64, f2: u64) -> bool {
        let (n1, n2) = (n1 as f64, n2 as f64);
        let bound =
            (0.5 * (2.0 / self.config.alpha).ln()).sqrt() * (1.0 / n1.sqrt() + 1.0 / n2.sqrt());
        (f1 as f64 / n1 - f2 as f64 / n2).abs() > bound
    }

    /// Recursive Hoeffding compatibility of the futures of two states.
    fn compatible(&self, a: StateId, b: StateId) -> bool {
        let mut stack = vec![(a, b)];
        let mut seen = HashSet::new();
        while let Some((x, y)) = stack.pop() {
            if x == y || !seen.insert((x, y)) {
                continue;
            }
            let (sx, sy) = (&self.states[&x], &self.states[&y]);
            if sx.visits < self.config.min_count || sy.visits < self.config.min_count {
                continue;
            }
            if self.different(sx.visits, sx.ends(), sy.visits, sy.ends()) {
                return false;
            }
            let symbols: BTreeSet<_> = sx.edges.keys().chain(sy.edges.keys()).collect();
            for symbol in symbols {
                let ex = sx.edges.get(symbol);
                let ey = sy.edges.get(symbol);
                let fx = ex.map_or(0, |e| e.count);
                let fy = ey.map_or(0, |e| e.count);
                if self.different(sx.visits, fx, sy.visits, fy) {
                    return false;
                }
                if let (Some(ex), Some(ey)) = (ex, ey) {
                    stack.push((ex.target, ey.target));
                }
            }
        }
        true
    }

    /// Absorbs `blue` (and recursively its successors) into `red`. The
    /// caller has already redirected the edge that led to `blue`.
    fn fold(&mut self, red: StateId, blue: StateId) {
        let mut renames: BTreeMap<StateId, StateId> = BTreeMap::new();
        let mut work = vec![(red, blue)];
        while let Some((keep, absorb)) = work.pop() {
            let absorbed = self.states.remove(&absorb).expect("absorbed state is live");
            let kept = self.state_mut(keep);
            kept.visits += absorbed.visits;
            for (symbol, edge) in absorbed.edges {
                match kept.edges.get_mut(&symbol) {
                    Some(existing) => {
                        existing.count += edge.count;
                        if existing.target != edge.target {
                            work.push((existing.target, edge.target));
                        }
                    }
                    None => {
                        kept.edges.insert(symbol, edge);
                    }
                }
            }
            let lowest = renames.get(&keep).copied().unwrap_or(keep);
            if absorb < lowest {
                renames.insert(keep, absorb);
            }
        }
        if !renames.is_empty() {
            self.rename(&renames);
        }
    }

    /// Gives merged states the lowest id among the states they absorbed.
    fn rename(&mut self, renames: &BTreeMap<StateId, StateId>) {
        for (old, new) in renames {
            let state = self.states.remove(old).expect("renamed state is live");
            self.states.insert(*new, state);
        }
        for state in self.states.values_mut() {
            for edge in state.edges.values_mut() {
                if let Some(new) = renames.get(&edge.target) {
                    edge.target = *new;
                }
            }
        }
    }

    /// Walks `symbols` from the root and returns the visited states.
    pub fn replay(&self, symbols: &[TemplateId]) -> Result<Path, ReplayError> {
        let mut current = StateId::ROOT;
        let mut path = Vec::with_capacity(symbols.len());
        for (position, symbol) in symbols.iter().enumerate() {
            let edge = self
                .transition(current, *symbol)
                .ok_or(ReplayError::UnknownTransition { position })?;
            current = edge.target;
            path.push(current);
        }
        Ok(Path(path))
    }

    /// Visit counts along a path, multiplicity preserved.
    pub fn path_frequencies(&self, path: &Path) -> Vec<u64> {
        path.0
            .iter()
            .map(|s| self.states.get(s).map_or(0, |s| s.visits))
            .collect()
    }

    /// Checks determinism, reachability, mass conservation and local flow.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let root = self
            .states
            .get(&StateId::ROOT)
            .ok_or(InvariantViolation::MissingRoot)?;
        if root.visits != self.total_traces {
            return Err(InvariantViolation::RootVisits {
                root: root.visits,
                traces: self.total_traces,
            });
        }
        let mut incoming: BTreeMap<StateId, u64> = BTreeMap::new();
        for (&id, state) in &self.states {
            if state.outgoing() > state.visits {
                return Err(InvariantViolation::Overflow(id));
            }
            for (&symbol, edge) in &state.edges {
                if !self.states.contains_key(&edge.target) {
                    return Err(InvariantViolation::DanglingEdge {
                        from: id,
                        symbol,
                        target: edge.target,
                    });
                }
                *incoming.entry(edge.target).or_default() += edge.count;
            }
        }
        let mut sum = 0;
        for (&id, state) in &self.states {
            let expected = if id == StateId::ROOT {
                self.total_traces + incoming.get(&id).copied().unwrap_or(0)
            } else {
                sum += state.visits;
                incoming.get(&id).copied().unwrap_or(0)
            };
            if state.visits != expected {
                return Err(InvariantViolation::LocalFlow {
                    state: id,
                    visits: state.visits,
                    incoming: expected,
                });
            }
        }
        if sum != self.total_symbols {
            return Err(InvariantViolation::MassConservation {
                sum,
                symbols: self.total_symbols,
            });
        }
        let mut seen = HashSet::from([StateId::ROOT]);
        let mut queue = VecDeque::from([StateId::ROOT]);
        while let Some(id) = queue.pop_front() {
            for edge in self.states[&id].edges.values() {
                if seen.insert(edge.target) {
                    queue.push_back(edge.target);
                }
            }
        }
        if let Some(&lost) = self.states.keys().find(|id| !seen.contains(id)) {
            return Err(InvariantViolation::Unreachable(lost));
        }
        Ok(())
    }

    /// Graphviz rendering with `<id>#<visits>` nodes and `<symbol>#<count>`
    /// edges.
    pub fn export_dot(&self) -> String {
        let mut out = String::from("digraph automaton {\n");
        for (id, state) in &self.states {
            let _ = writeln!(out, "  {id} [label=\"{id}#{}\"];", state.visits);
        }
        for (id, state) in &self.states {
            for (symbol, edge) in &state.edges {
                let _ = writeln!(
                    out,
                    "  {id} -> {} [label=\"{symbol}#{}\"];",
                    edge.target, edge.count
                );
            }
        }
        out.push_str("}\n");
        out
    }

    /// Compact line dump: `STATE id visits` lines, then
    /// `EDGE src symbol dst count` lines.
    pub fn dump(&self) -> String {
        let mut out = String::from("# mish-model 1\n");
        for (id, state) in &self.states {
            let _ = writeln!(out, "STATE {id} {}", state.visits);
        }
        for (id, state) in &self.states {
            for (symbol, edge) in &state.edges {
                let _ = writeln!(out, "EDGE {id} {symbol} {} {}", edge.target, edge.count);
            }
        }
        out
    }

    /// Rebuilds a model from [`Automaton::dump`] output. All loaded states
    /// are treated as established core states.
    pub fn from_dump(text: &str, config: LearnerConfig) -> Result<Self, ModelParseError> {
        let mut model = Automaton::new(config);
        model.states.clear();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let syntax = |reason: &str| ModelParseError::Syntax {
                line,
                reason: reason.to_string(),
            };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let nums: Vec<u64> = fields[1..]
                .iter()
                .map(|f| f.parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|_| syntax("expected non-negative integers"))?;
            let id = |n: u64| {
                u32::try_from(n)
                    .map(StateId)
                    .map_err(|_| syntax("id too large"))
            };
            match (fields[0], nums.as_slice()) {
                ("STATE", &[state, visits]) => {
                    let state = id(state)?;
                    let entry = State {
                        visits,
                        edges: BTreeMap::new(),
                        core: true,
                    };
                    if model.states.insert(state, entry).is_some() {
                        return Err(syntax("duplicate state"));
                    }
                }
                ("EDGE", &[src, symbol, dst, count]) => {
                    let symbol =
                        TemplateId(u32::try_from(symbol).map_err(|_| syntax("symbol too large"))?);
                    let (src, dst) = (id(src)?, id(dst)?);
                    if count == 0 {
                        return Err(syntax("edge count must be positive"));
                    }
                    let state = model
                        .states
                        .get_mut(&src)
                        .ok_or_else(|| syntax("edge from undeclared state"))?;
                    if state
                        .edges
                        .insert(symbol, Edge { target: dst, count })
                        .is_some()
                    {
                        return Err(syntax("nondeterministic transition"));
                    }
                    model.alphabet.insert(symbol);
                }
                _ => {
                    return Err(syntax(
                        "expected STATE <id> <visits> or EDGE <src> <sym> <dst> <count>",
                    ))
                }
            }
        }
        let root = model
            .states
            .get(&StateId::ROOT)
            .ok_or(InvariantViolation::MissingRoot)?;
        model.total_traces = root.visits;
        model.total_symbols = model
            .states
            .iter()
            .filter(|(id, _)| **id != StateId::ROOT)
            .map(|(_, s)| s.visits)
            .sum();
        model.next_id = model.states.keys().last().map_or(1, |id| id.0 + 1);
        model.validate()?;
        Ok(model)
    }
}
