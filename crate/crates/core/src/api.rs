//! REST call model shared by the search engine and the executors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
    Put,
    Delete,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Put => "PUT",
            Method::Delete => "DELETE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "GET" => Ok(Method::Get),
            "POST" => Ok(Method::Post),
            "PUT" => Ok(Method::Put),
            "DELETE" => Ok(Method::Delete),
            other => Err(format!("unsupported method `{other}`")),
        }
    }
}

/// Concrete parameter value. Enum members are carried as strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

/// Where a live adapter places a parameter in the HTTP request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamLocation {
    Path,
    #[default]
    Query,
    Body,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamKind {
    /// Inclusive integer range.
    Int {
        min: i64,
        max: i64,
    },
    Enum(Vec<String>),
    /// Free-form text.
    Str,
}

/// Declared parameter of an endpoint.
///
/// In configuration files exactly one of `int = [min, max]`,
/// `one_of = [..]` or `string = true` selects the kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawParam", into = "RawParam")]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub location: ParamLocation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    int: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    one_of: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    string: Option<bool>,
    #[serde(default, rename = "in")]
    location: ParamLocation,
}

impl TryFrom<RawParam> for ParamSpec {
    type Error = String;

    fn try_from(raw: RawParam) -> Result<Self, Self::Error> {
        let kind = match (raw.int, raw.one_of, raw.string) {
            (Some([min, max]), None, None | Some(false)) => {
                if min > max {
                    return Err(format!("param `{}`: empty range [{min}, {max}]", raw.name));
                }
                ParamKind::Int { min, max }
            }
            (None, Some(values), None | Some(false)) => {
                if values.is_empty() {
                    return Err(format!("param `{}`: one_of must not be empty", raw.name));
                }
                ParamKind::Enum(values)
            }
            (None, None, Some(true)) => ParamKind::Str,
            _ => {
                return Err(format!(
                    "param `{}`: set exactly one of int, one_of, string",
                    raw.name
                ))
            }
        };
        Ok(ParamSpec {
            name: raw.name,
            kind,
            location: raw.location,
        })
    }
}

impl From<ParamSpec> for RawParam {
    fn from(spec: ParamSpec) -> Self {
        let (int, one_of, string) = match spec.kind {
            ParamKind::Int { min, max } => (Some([min, max]), None, None),
            ParamKind::Enum(values) => (None, Some(values), None),
            ParamKind::Str => (None, None, Some(true)),
        };
        RawParam {
            name: spec.name,
            int,
            one_of,
            string,
            location: spec.location,
        }
    }
}

impl ParamSpec {
    pub fn accepts(&self, value: &ParamValue) -> bool {
        match (&self.kind, value) {
            (ParamKind::Int { min, max }, ParamValue::Int(v)) => (min..=max).contains(&v),
            (ParamKind::Enum(values), ParamValue::Str(s)) => values.contains(s),
            (ParamKind::Str, ParamValue::Str(_)) => true,
            _ => false,
        }
    }
}

/// One REST call of a test case.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RestCall {
    pub method: Method,
    pub endpoint: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    /// Attach the session captured earlier in the same test case.
    #[serde(default)]
    pub uses_session: bool,
}

impl fmt::Display for RestCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.endpoint)?;
        if !self.params.is_empty() {
            let params: Vec<String> = self
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            write!(f, "?{}", params.join("&"))?;
        }
        if self.uses_session {
            f.write_str(" [session]")?;
        }
        Ok(())
    }
}

/// An ordered sequence of REST calls.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub calls: Vec<RestCall>,
}

impl TestCase {
    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }
}

/// What the search engine needs to know about an endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointSchema {
    pub path: String,
    pub methods: Vec<Method>,
    pub params: Vec<ParamSpec>,
    /// Successful calls establish a session for later calls.
    pub login: bool,
}

/// The callable surface of a system under test.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ApiSchema {
    pub endpoints: Vec<EndpointSchema>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CallViolation {
    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),
    #[error("method {method} not declared for `{endpoint}`")]
    Method { endpoint: String, method: Method },
    #[error("parameter `{param}` of `{endpoint}` is missing or out of domain")]
    Param { endpoint: String, param: String },
    #[error("test case has {len} calls, expected 1..={max}")]
    Length { len: usize, max: usize },
}

impl ApiSchema {
    pub fn endpoint(&self, path: &str) -> Option<&EndpointSchema> {
        self.endpoints.iter().find(|e| e.path == path)
    }

    pub fn is_login(&self, path: &str) -> bool {
        self.endpoint(path).is_some_and(|e| e.login)
    }

    pub fn check_call(&self, call: &RestCall) -> Result<(), CallViolation> {
        let ep = self
            .endpoint(&call.endpoint)
            .ok_or_else(|| CallViolation::UnknownEndpoint(call.endpoint.clone()))?;
        if !ep.methods.contains(&call.method) {
            return Err(CallViolation::Method {
                endpoint: ep.path.clone(),
                method: call.method,
            });
        }
        for spec in &ep.params {
            if !call.params.get(&spec.name).is_some_and(|v| spec.accepts(v)) {
                return Err(CallViolation::Param {
                    endpoint: ep.path.clone(),
                    param: spec.name.clone(),
                });
            }
        }
        if let Some(extra) = call
            .params
            .keys()
            .find(|k| !ep.params.iter().any(|p| &p.name == *k))
        {
            return Err(CallViolation::Param {
                endpoint: ep.path.clone(),
                param: extra.clone(),
            });
        }
        Ok(())
    }

    pub fn check_test(&self, test: &TestCase, max_len: usize) -> Result<(), CallViolation> {
        if test.is_empty() || test.len() > max_len {
            return Err(CallViolation::Length {
                len: test.len(),
                max: max_len,
            });
        }
        test.calls.iter().try_for_each(|c| self.check_call(c))
    }
}
