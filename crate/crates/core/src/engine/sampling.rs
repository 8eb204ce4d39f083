//! Random test sampling and the single-step mutation operator.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::api::{ApiSchema, ParamKind, ParamSpec, ParamValue, RestCall, TestCase};

/// Seed strings for free-text parameters; the rest are random lowercase words.
const STRING_POOL: [&str; 8] = ["", "a", "admin", "test", "null", "0", "-1", "x y"];

/// Draws a test case: geometric length (p = 0.5) capped at `max_len`,
/// uniform endpoints and methods, parameters uniform over their domains.
///
/// Panics if the schema has no endpoints; callers check this up front.
pub fn sample_random<R: Rng + ?Sized>(schema: &ApiSchema, max_len: usize, rng: &mut R) -> TestCase {
    let mut len = 1;
    while len < max_len && rng.gen_bool(0.5) {
        len += 1;
    }
    let mut calls: Vec<RestCall> = Vec::with_capacity(len);
    for _ in 0..len {
        let login_seen = calls.iter().any(|c| schema.is_login(&c.endpoint));
        calls.push(random_call(schema, login_seen, rng));
    }
    TestCase { calls }
}

pub fn random_call<R: Rng + ?Sized>(schema: &ApiSchema, login_seen: bool, rng: &mut R) -> RestCall {
    let ep = schema
        .endpoints
        .choose(rng)
        .expect("schema has at least one endpoint");
    let method = *ep.methods.choose(rng).expect("endpoint declares a method");
    let params = ep
        .params
        .iter()
        .map(|p| (p.name.clone(), random_value(p, rng)))
        .collect();
    RestCall {
        method,
        endpoint: ep.path.clone(),
        params,
        uses_session: login_seen && rng.gen_bool(0.5),
    }
}

pub fn random_value<R: Rng + ?Sized>(spec: &ParamSpec, rng: &mut R) -> ParamValue {
    match &spec.kind {
        ParamKind::Int { min, max } => ParamValue::Int(rng.gen_range(*min..=*max)),
        ParamKind::Enum(values) => ParamValue::Str(values.choose(rng).unwrap().clone()),
        ParamKind::Str => {
            if rng.gen_bool(0.5) {
                ParamValue::Str(STRING_POOL.choose(rng).unwrap().to_string())
            } else {
                let len = rng.gen_range(1..=6);
                ParamValue::Str((0..len).map(|_| rng.gen_range('a'..='z')).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationOp {
    Perturb,
    Insert,
    Delete,
    Swap,
    ToggleSession,
}

pub fn applicable_ops(test: &TestCase, schema: &ApiSchema, max_len: usize) -> Vec<MutationOp> {
    let mut ops = Vec::with_capacity(5);
    if test.calls.iter().any(|c| has_params(schema, c)) {
        ops.push(MutationOp::Perturb);
    }
    if test.len() < max_len {
        ops.push(MutationOp::Insert);
    }
    if test.len() > 1 {
        ops.push(MutationOp::Delete);
        ops.push(MutationOp::Swap);
    }
    ops.push(MutationOp::ToggleSession);
    ops
}

fn has_params(schema: &ApiSchema, call: &RestCall) -> bool {
    schema
        .endpoint(&call.endpoint)
        .is_some_and(|e| !e.params.is_empty())
}

/// Applies exactly one operator, picked uniformly among the applicable ones.
pub fn mutate<R: Rng + ?Sized>(
    test: &TestCase,
    schema: &ApiSchema,
    max_len: usize,
    rng: &mut R,
) -> (TestCase, MutationOp) {
    let ops = applicable_ops(test, schema, max_len);
    let op = *ops.choose(rng).unwrap();
    let mut calls = test.calls.clone();
    match op {
        MutationOp::Perturb => {
            let candidates: Vec<usize> = (0..calls.len())
                .filter(|&i| has_params(schema, &calls[i]))
                .collect();
            let i = *candidates.choose(rng).unwrap();
            let ep = schema.endpoint(&calls[i].endpoint).unwrap();
            let spec = ep.params.choose(rng).unwrap();
            let current = calls[i].params.get(&spec.name).cloned();
            let next = perturb(spec, current, rng);
            calls[i].params.insert(spec.name.clone(), next);
        }
        MutationOp::Insert => {
            let pos = rng.gen_range(0..=calls.len());
            let login_seen = calls[..pos].iter().any(|c| schema.is_login(&c.endpoint));
            calls.insert(pos, random_call(schema, login_seen, rng));
        }
        MutationOp::Delete => {
            let pos = rng.gen_range(0..calls.len());
            calls.remove(pos);
        }
        MutationOp::Swap => {
            let pos = rng.gen_range(0..calls.len() - 1);
            calls.swap(pos, pos + 1);
        }
        MutationOp::ToggleSession => {
            let pos = rng.gen_range(0..calls.len());
            calls[pos].uses_session = !calls[pos].uses_session;
        }
    }
    (TestCase { calls }, op)
}

fn perturb<R: Rng + ?Sized>(
    spec: &ParamSpec,
    current: Option<ParamValue>,
    rng: &mut R,
) -> ParamValue {
    match (&spec.kind, current) {
        (ParamKind::Int { min, max }, Some(ParamValue::Int(v)))
            if min < max && rng.gen_bool(0.5) =>
        {
            let step = if v <= *min {
                1
            } else if v >= *max {
                -1
            } else if rng.gen_bool(0.5) {
                1
            } else {
                -1
            };
            ParamValue::Int((v + step).clamp(*min, *max))
        }
        _ => random_value(spec, rng),
    }
}
