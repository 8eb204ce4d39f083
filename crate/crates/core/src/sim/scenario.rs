//! Declarative scenario files for the simulator.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! schema_version = 1
//! name = "shop"
//! targets = ["shop:list"]
//! faults = ["shop:list:500"]
//!
//! [[endpoints]]
//! service = "shop"
//! path = "/items"
//! methods = ["GET"]
//! params = [{ name = "page", int = [0, 9] }]
//! guard = { session = true }          # optional; `role` and `flags` imply a session
//! faults = [{ id = "shop:list:500", when = [{ param = "page", eq = 9 }] }]
//! effects = [
//!   { log = "shop listed page={page}", cover = ["shop:list"] },
//!   { when = [{ param = "page", gt = 5 }], call = "/internal/audit" },
//! ]
//! ```
//!
//! Conditions are `{ param, eq|ne|lt|le|gt|ge }`, `{ flag }`, `{ no_flag }`,
//! `{ role }` or `{ session }`. Log lines may interpolate `{param}` and
//! `{role}`. Endpoints marked `internal = true` are reachable only through
//! `call` effects and receive the caller's parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::api::{ApiSchema, EndpointSchema, Method, ParamKind, ParamSpec, ParamValue};
use crate::exec::{FaultId, TargetId};

pub const SCHEMA_VERSION: u32 = 1;

const BUILTIN: [(&str, &str); 3] = [
    (
        "auth-chain",
        include_str!("../../scenarios/auth-chain.toml"),
    ),
    ("flat-api", include_str!("../../scenarios/flat-api.toml")),
    ("branching", include_str!("../../scenarios/branching.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cmp {
    Eq(ParamValue),
    Ne(ParamValue),
    Lt(i64),
    Le(i64),
    Gt(i64),
    Ge(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(try_from = "RawCondition")]
pub enum Condition {
    Param { name: String, cmp: Cmp },
    Flag(String),
    NoFlag(String),
    Role(String),
    Session(bool),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    param: Option<String>,
    eq: Option<ParamValue>,
    ne: Option<ParamValue>,
    lt: Option<i64>,
    le: Option<i64>,
    gt: Option<i64>,
    ge: Option<i64>,
    flag: Option<String>,
    no_flag: Option<String>,
    role: Option<String>,
    session: Option<bool>,
}

impl TryFrom<RawCondition> for Condition {
    type Error = String;

    fn try_from(raw: RawCondition) -> Result<Self, Self::Error> {
        let mut cmps = Vec::new();
        cmps.extend(raw.eq.map(Cmp::Eq));
        cmps.extend(raw.ne.map(Cmp::Ne));
        cmps.extend(raw.lt.map(Cmp::Lt));
        cmps.extend(raw.le.map(Cmp::Le));
        cmps.extend(raw.gt.map(Cmp::Gt));
        cmps.extend(raw.ge.map(Cmp::Ge));
        let mut kinds = Vec::new();
        if let Some(name) = raw.param {
            if cmps.len() != 1 {
                return Err(format!(
                    "condition on `{name}` needs exactly one comparison"
                ));
            }
            kinds.push(Condition::Param {
                name,
                cmp: cmps.pop().unwrap(),
            });
        } else if !cmps.is_empty() {
            return Err("comparison without `param`".into());
        }
        kinds.extend(raw.flag.map(Condition::Flag));
        kinds.extend(raw.no_flag.map(Condition::NoFlag));
        kinds.extend(raw.role.map(Condition::Role));
        kinds.extend(raw.session.map(Condition::Session));
        match kinds.len() {
            1 => Ok(kinds.pop().unwrap()),
            0 => Err("empty condition".into()),
            _ => Err("a condition must test exactly one thing".into()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guard {
    #[serde(default)]
    pub session: bool,
    pub role: Option<String>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl Guard {
    pub fn needs_session(&self) -> bool {
        self.session || self.role.is_some() || !self.flags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultRule {
    pub id: String,
    #[serde(default)]
    pub when: Vec<Condition>,
    pub log: Option<String>,
}

/// One effect entry. Its parts fire in field order: log, cover,
/// set_session, set_flag, call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Effect {
    #[serde(default)]
    pub when: Vec<Condition>,
    pub log: Option<String>,
    #[serde(default)]
    pub cover: Vec<String>,
    /// Role of the session to establish; may interpolate parameters.
    pub set_session: Option<String>,
    pub set_flag: Option<String>,
    pub call: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub service: String,
    pub path: String,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub login: bool,
    #[serde(default)]
    pub internal: bool,
    #[serde(default)]
    pub guard: Guard,
    #[serde(default)]
    pub faults: Vec<FaultRule>,
    #[serde(default)]
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default)]
    pub faults: Vec<String>,
    #[serde(default)]
    pub endpoints: Vec<Endpoint>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// One of the fixtures compiled into the library.
    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml_str(text).expect("builtin scenario is valid"))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    /// Loads `spec` as a file when it exists, otherwise as a builtin name.
    pub fn resolve(spec: &str) -> Result<Self, ScenarioError> {
        let path = Path::new(spec);
        if path.exists() {
            return Self::load(path);
        }
        Self::builtin(spec).ok_or_else(|| ScenarioError::Io {
            path: spec.to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file and no builtin scenario of that name",
            ),
        })
    }

    pub fn list_targets(&self) -> BTreeSet<TargetId> {
        self.targets.iter().cloned().map(TargetId).collect()
    }

    pub fn list_faults(&self) -> BTreeSet<FaultId> {
        self.faults.iter().cloned().map(FaultId).collect()
    }

    pub fn endpoint(&self, path: &str) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.path == path)
    }

    /// The externally callable endpoints.
    pub fn api_schema(&self) -> ApiSchema {
        ApiSchema {
            endpoints: self
                .endpoints
                .iter()
                .filter(|e| !e.internal)
                .map(|e| EndpointSchema {
                    path: e.path.clone(),
                    methods: e.methods.clone(),
                    params: e.params.clone(),
                    login: e.login,
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(self.schema_version));
        }
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        let targets: BTreeSet<&str> = self.targets.iter().map(String::as_str).collect();
        if targets.len() != self.targets.len() {
            return invalid("duplicate target id".into());
        }
        let faults: BTreeSet<&str> = self.faults.iter().map(String::as_str).collect();
        if faults.len() != self.faults.len() {
            return invalid("duplicate fault id".into());
        }

        let mut by_path: BTreeMap<&str, &Endpoint> = BTreeMap::new();
        for ep in &self.endpoints {
            if by_path.insert(&ep.path, ep).is_some() {
                return invalid(format!("duplicate endpoint `{}`", ep.path));
            }
            if !ep.internal && ep.methods.is_empty() {
                return invalid(format!("`{}` declares no methods", ep.path));
            }
            let names: BTreeSet<&str> = ep.params.iter().map(|p| p.name.as_str()).collect();
            if names.len() != ep.params.len() {
                return invalid(format!("`{}` declares a parameter twice", ep.path));
            }
            for rule in &ep.faults {
                if !faults.contains(rule.id.as_str()) {
                    return invalid(format!(
                        "`{}` raises undeclared fault `{}`",
                        ep.path, rule.id
                    ));
                }
            }
            for effect in &ep.effects {
                if let Some(id) = effect.cover.iter().find(|t| !targets.contains(t.as_str())) {
                    return invalid(format!("`{}` covers undeclared target `{id}`", ep.path));
                }
            }
        }

        for ep in &self.endpoints {
            for callee in ep.effects.iter().filter_map(|e| e.call.as_deref()) {
                match by_path.get(callee) {
                    Some(c) if c.internal => {}
                    Some(_) => return invalid(format!("`{callee}` is called but not internal")),
                    None => return invalid(format!("`{}` calls unknown `{callee}`", ep.path)),
                }
            }
        }

        // Every endpoint reachable from an external one sees that endpoint's
        // parameters; walk the call graph to check acyclicity and references.
        for root in self.endpoints.iter().filter(|e| !e.internal) {
            let params: BTreeMap<&str, &ParamSpec> =
                root.params.iter().map(|p| (p.name.as_str(), p)).collect();
            let mut stack = Vec::new();
            self.walk(root, &by_path, &params, &mut stack)?;
        }
        Ok(())
    }

    fn walk<'a>(
        &'a self,
        ep: &'a Endpoint,
        by_path: &BTreeMap<&str, &'a Endpoint>,
        params: &BTreeMap<&str, &ParamSpec>,
        stack: &mut Vec<&'a str>,
    ) -> Result<(), ScenarioError> {
        if stack.contains(&ep.path.as_str()) {
            return Err(ScenarioError::Invalid(format!(
                "call cycle through `{}`",
                ep.path
            )));
        }
        stack.push(&ep.path);
        let check_conds = |conds: &[Condition]| -> Result<(), ScenarioError> {
            for c in conds {
                if let Condition::Param { name, cmp } = c {
                    let Some(spec) = params.get(name.as_str()) else {
                        return Err(ScenarioError::Invalid(format!(
                            "`{}` tests unknown parameter `{name}`",
                            ep.path
                        )));
                    };
                    let ordered = matches!(cmp, Cmp::Lt(_) | Cmp::Le(_) | Cmp::Gt(_) | Cmp::Ge(_));
                    if ordered && !matches!(spec.kind, ParamKind::Int { .. }) {
                        return Err(ScenarioError::Invalid(format!(
                            "`{}` orders non-integer parameter `{name}`",
                            ep.path
                        )));
                    }
                }
            }
            Ok(())
        };
        let check_text = |text: &str| -> Result<(), ScenarioError> {
            for name in placeholders(text) {
                if name != "role" && !params.contains_key(name) {
                    return Err(ScenarioError::Invalid(format!(
                        "`{}` interpolates unknown `{{{name}}}`",
                        ep.path
                    )));
                }
            }
            Ok(())
        };
        for rule in &ep.faults {
            check_conds(&rule.when)?;
            rule.log.as_deref().map(check_text).transpose()?;
        }
        for effect in &ep.effects {
            check_conds(&effect.when)?;
            effect.log.as_deref().map(check_text).transpose()?;
            effect.set_session.as_deref().map(check_text).transpose()?;
            if let Some(callee) = effect.call.as_deref() {
                self.walk(by_path[callee], by_path, params, stack)?;
            }
        }
        stack.pop();
        Ok(())
    }
}

/// Names inside `{...}` in a log template.
pub(crate) fn placeholders(text: &str) -> impl Iterator<Item = &str> {
    text.split('{')
        .skip(1)
        .filter_map(|rest| rest.split_once('}').map(|(name, _)| name))
}
