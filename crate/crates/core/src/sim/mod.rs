//! Deterministic in-process stand-in for a microservice application.

mod scenario;

pub use scenario::{
    Cmp, Condition, Effect, Endpoint, FaultRule, Guard, Scenario, ScenarioError, SCHEMA_VERSION,
};

use std::collections::{BTreeMap, BTreeSet};

use crate::api::{ParamValue, RestCall, TestCase};
use crate::exec::{CallStatus, ExecError, ExecutionResult, Executor, FaultId, TargetId};
use crate::trace::{ExecutionWindow, LogEvent, TestId};

/// Logical clock resolution: one emitted event is one simulated millisecond.
pub const TICK_NS: u64 = 1_000_000;

#[derive(Debug, Default)]
struct TestState {
    role: Option<String>,
    flags: BTreeSet<String>,
}

struct Outcome<'a> {
    events: &'a mut Vec<LogEvent>,
    covered: &'a mut BTreeSet<TargetId>,
    faults: &'a mut BTreeSet<FaultId>,
}

/// Executes test cases against a [`Scenario`] on a logical clock.
pub struct Simulator {
    scenario: Scenario,
    clock: u64,
    persistent: bool,
    persisted_flags: BTreeSet<String>,
}

impl Simulator {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            clock: 0,
            persistent: false,
            persisted_flags: BTreeSet::new(),
        }
    }

    /// Keep flags across test cases until [`Executor::reset`]. Sessions are
    /// always per test case.
    pub fn with_persistent_state(mut self, persistent: bool) -> Self {
        self.persistent = persistent;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    fn emit(&mut self, out: &mut Outcome<'_>, service: &str, message: String) {
        self.clock += TICK_NS;
        out.events.push(LogEvent {
            timestamp: self.clock,
            service: service.to_string(),
            message,
        });
    }

    fn call(
        &mut self,
        call: &RestCall,
        state: &mut TestState,
        out: &mut Outcome<'_>,
    ) -> Result<u16, ExecError> {
        let ep = match self.scenario.endpoint(&call.endpoint) {
            Some(ep) if !ep.internal => ep.clone(),
            _ => return Err(ExecError::UnknownEndpoint(call.endpoint.clone())),
        };
        let session = if call.uses_session {
            state.role.clone()
        } else {
            None
        };

        let guard = &ep.guard;
        let admitted = !guard.needs_session()
            || session.as_ref().is_some_and(|role| {
                guard.role.as_ref().is_none_or(|r| r == role)
                    && guard.flags.iter().all(|f| state.flags.contains(f))
            });
        if !admitted {
            let line = format!("{} denied unauthorized call to {}", ep.service, ep.path);
            self.emit(out, &ep.service, line);
            return Ok(403);
        }

        let params_ok = ep.methods.contains(&call.method)
            && ep
                .params
                .iter()
                .all(|p| call.params.get(&p.name).is_some_and(|v| p.accepts(v)))
            && call
                .params
                .keys()
                .all(|k| ep.params.iter().any(|p| &p.name == k));
        if !params_ok {
            let line = format!("{} rejected malformed call to {}", ep.service, ep.path);
            self.emit(out, &ep.service, line);
            return Ok(400);
        }

        let mut ctx = Context {
            params: &call.params,
            session,
            state,
        };
        match self.run_endpoint(&ep, &mut ctx, out) {
            Ok(()) => Ok(200),
            Err(Raised) => Ok(500),
        }
    }

    fn run_endpoint(
        &mut self,
        ep: &Endpoint,
        ctx: &mut Context<'_>,
        out: &mut Outcome<'_>,
    ) -> Result<(), Raised> {
        if let Some(rule) = ep.faults.iter().find(|r| ctx.holds(&r.when)) {
            let line = match &rule.log {
                Some(template) => ctx.render(template),
                None => format!("{} failed with internal error on {}", ep.service, ep.path),
            };
            self.emit(out, &ep.service, line);
            out.faults.insert(FaultId(rule.id.clone()));
            return Err(Raised);
        }
        for effect in &ep.effects {
            if !ctx.holds(&effect.when) {
                continue;
            }
            if let Some(template) = &effect.log {
                let line = ctx.render(template);
                self.emit(out, &ep.service, line);
            }
            out.covered
                .extend(effect.cover.iter().cloned().map(TargetId));
            if let Some(role) = &effect.set_session {
                let role = ctx.render(role);
                ctx.state.role = Some(role.clone());
                ctx.session = Some(role);
            }
            if let Some(flag) = &effect.set_flag {
                ctx.state.flags.insert(flag.clone());
            }
            if let Some(callee) = &effect.call {
                let sub = self
                    .scenario
                    .endpoint(callee)
                    .expect("validated call target")
                    .clone();
                self.run_endpoint(&sub, ctx, out)?;
            }
        }
        Ok(())
    }
}

/// A fault rule fired; the enclosing external call answers 500.
struct Raised;

struct Context<'a> {
    params: &'a BTreeMap<String, ParamValue>,
    /// Role of the session presented by the current call.
    session: Option<String>,
    state: &'a mut TestState,
}

impl Context<'_> {
    fn holds(&self, conds: &[Condition]) -> bool {
        conds.iter().all(|c| match c {
            Condition::Param { name, cmp } => {
                let Some(value) = self.params.get(name) else {
                    return false;
                };
                match (cmp, value) {
                    (Cmp::Eq(v), _) => value == v,
                    (Cmp::Ne(v), _) => value != v,
                    (Cmp::Lt(b), ParamValue::Int(x)) => x < b,
                    (Cmp::Le(b), ParamValue::Int(x)) => x <= b,
                    (Cmp::Gt(b), ParamValue::Int(x)) => x > b,
                    (Cmp::Ge(b), ParamValue::Int(x)) => x >= b,
                    _ => false,
                }
            }
            Condition::Flag(f) => self.state.flags.contains(f),
            Condition::NoFlag(f) => !self.state.flags.contains(f),
            Condition::Role(r) => self.session.as_ref() == Some(r),
            Condition::Session(want) => self.session.is_some() == *want,
        })
    }

    fn render(&self, template: &str) -> String {
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            match rest[open + 1..].find('}') {
                Some(close) => {
                    let name = &rest[open + 1..open + 1 + close];
                    if name == "role" {
                        out.push_str(self.session.as_deref().unwrap_or("anonymous"));
                    } else if let Some(v) = self.params.get(name) {
                        out.push_str(&v.to_string());
                    }
                    rest = &rest[open + close + 2..];
                }
                None => {
                    out.push_str(&rest[open..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out
    }
}

impl Executor for Simulator {
    fn execute(&mut self, test: &TestCase, id: TestId) -> Result<ExecutionResult, ExecError> {
        let mut state = TestState::default();
        if self.persistent {
            state.flags = self.persisted_flags.clone();
        }
        let mut events = Vec::new();
        let mut covered = BTreeSet::new();
        let mut faults = BTreeSet::new();
        let mut statuses = Vec::with_capacity(test.len());
        let mut out = Outcome {
            events: &mut events,
            covered: &mut covered,
            faults: &mut faults,
        };
        for call in &test.calls {
            let status = self.call(call, &mut state, &mut out)?;
            statuses.push(CallStatus::Http(status));
        }
        if self.persistent {
            self.persisted_flags = state.flags;
        }
        let window = match (events.first(), events.last()) {
            (Some(first), Some(last)) => ExecutionWindow {
                test_id: id,
                start: first.timestamp,
                end: last.timestamp,
            },
            _ => {
                self.clock += TICK_NS;
                ExecutionWindow {
                    test_id: id,
                    start: self.clock,
                    end: self.clock,
                }
            }
        };
        Ok(ExecutionResult {
            statuses,
            events,
            covered,
            faults,
            window,
        })
    }

    fn reset(&mut self) {
        self.persisted_flags.clear();
    }

    fn elapsed_s(&self) -> f64 {
        self.clock as f64 / 1e9
    }
}
