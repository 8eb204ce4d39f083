//! Live executor: sends test cases to a running service over HTTP and
//! collects the lines its log files gain meanwhile.
//!
//! Configuration is a TOML file in the same conventions as scenarios:
//!
//! ```toml
//! schema_version = 1
//! base_url = "http://127.0.0.1:8080"
//! timeout_ms = 2000
//! log_sources = ["/var/log/shop/api.log"]
//!
//! [[endpoints]]
//! name = "item"
//! path = "/items/{id}"
//! methods = ["GET", "DELETE"]
//! params = [{ name = "id", int = [0, 99], in = "path" }]
//! ```
//!
//! Coverage targets are `name:<status class>` (e.g. `item:2xx`) and every
//! 500 answer is reported as fault `name:500`. Log lines get timestamps by
//! arrival order inside the test's window; the service's own clock is not
//! consulted.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::header::{CONTENT_TYPE, COOKIE, SET_COOKIE};
use reqwest::Url;
use serde::Deserialize;
use thiserror::Error;

use crate::api::{
    ApiSchema, EndpointSchema, Method, ParamLocation, ParamSpec, ParamValue, RestCall, TestCase,
};
use crate::exec::{CallStatus, ExecError, ExecutionResult, Executor, FaultId, TargetId};
use crate::trace::{ExecutionWindow, LogEvent, TestId};

pub const SCHEMA_VERSION: u32 = 1;
const POLL_INTERVAL: Duration = Duration::from_millis(5);

fn default_timeout_ms() -> u64 {
    2000
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveEndpoint {
    /// Prefix of target and fault ids; defaults to the path.
    pub name: Option<String>,
    /// Path template; `{param}` segments are filled from path parameters.
    pub path: String,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub login: bool,
}

impl LiveEndpoint {
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub base_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub log_sources: Vec<PathBuf>,
    /// Pause after the last response before collecting log lines.
    #[serde(default)]
    pub log_settle_ms: u64,
    pub endpoints: Vec<LiveEndpoint>,
}

#[derive(Debug, Error)]
pub enum LiveConfigError {
    #[error("cannot read live config `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed live config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid live config: {0}")]
    Invalid(String),
}

impl LiveConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, LiveConfigError> {
        let config: LiveConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, LiveConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| LiveConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<(), LiveConfigError> {
        let invalid = |m: String| Err(LiveConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported schema_version {}",
                self.schema_version
            ));
        }
        if self.endpoints.is_empty() {
            return invalid("endpoint table is empty".into());
        }
        if let Err(e) = Url::parse(&self.base_url) {
            return invalid(format!("base_url: {e}"));
        }
        let mut seen = BTreeSet::new();
        for ep in &self.endpoints {
            if !seen.insert(ep.path.as_str()) {
                return invalid(format!("duplicate endpoint `{}`", ep.path));
            }
            if ep.methods.is_empty() {
                return invalid(format!("`{}` declares no methods", ep.path));
            }
            for p in ep
                .params
                .iter()
                .filter(|p| p.location == ParamLocation::Path)
            {
                if !ep.path.contains(&format!("{{{}}}", p.name)) {
                    return invalid(format!("`{}` has no `{{{}}}` segment", ep.path, p.name));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("live")
    }

    pub fn api_schema(&self) -> ApiSchema {
        ApiSchema {
            endpoints: self
                .endpoints
                .iter()
                .map(|e| EndpointSchema {
                    path: e.path.clone(),
                    methods: e.methods.clone(),
                    params: e.params.clone(),
                    login: e.login,
                })
                .collect(),
        }
    }
}

enum Command {
    Flush(u64),
    Stop,
}

enum TailMsg {
    Line { service: String, text: String },
    Flushed(u64),
}

struct Source {
    path: PathBuf,
    service: String,
    file: Option<File>,
    offset: u64,
    partial: Vec<u8>,
}

impl Source {
    fn new(path: PathBuf) -> Self {
        let service = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "log".into());
        // only lines written after the adapter starts are of interest
        let offset = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        Self {
            path,
            service,
            file: None,
            offset,
            partial: Vec::new(),
        }
    }

    /// Complete lines appended since the last poll, in file order.
    fn poll(&mut self) -> Vec<String> {
        if self.file.is_none() {
            self.file = File::open(&self.path).ok();
        }
        let Some(file) = self.file.as_mut() else {
            return Vec::new();
        };
        let len = file.metadata().map(|m| m.len()).unwrap_or(0);
        if len < self.offset {
            // truncated or rotated in place
            self.offset = 0;
            self.partial.clear();
        }
        let mut buf = Vec::new();
        if file.seek(SeekFrom::Start(self.offset)).is_ok() && file.read_to_end(&mut buf).is_ok() {
            self.offset += buf.len() as u64;
            self.partial.extend_from_slice(&buf);
        }
        let mut lines = Vec::new();
        while let Some(nl) = self.partial.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = self.partial.drain(..=nl).collect();
            let text = String::from_utf8_lossy(&line).trim_end().to_string();
            if !text.is_empty() {
                lines.push(text);
            }
        }
        lines
    }
}

/// Background reader of the configured log files.
struct Tailer {
    commands: Sender<Command>,
    lines: Receiver<TailMsg>,
    handle: Option<JoinHandle<()>>,
    seq: u64,
}

impl Tailer {
    fn spawn(paths: Vec<PathBuf>) -> Self {
        let (cmd_tx, cmd_rx) = mpsc::channel();
        let (msg_tx, msg_rx) = mpsc::channel();
        let mut sources: Vec<Source> = paths.into_iter().map(Source::new).collect();
        let handle = std::thread::spawn(move || loop {
            let cmd = cmd_rx.recv_timeout(POLL_INTERVAL);
            for src in &mut sources {
                for text in src.poll() {
                    let msg = TailMsg::Line {
                        service: src.service.clone(),
                        text,
                    };
                    if msg_tx.send(msg).is_err() {
                        return;
                    }
                }
            }
            match cmd {
                Ok(Command::Flush(seq)) => {
                    if msg_tx.send(TailMsg::Flushed(seq)).is_err() {
                        return;
                    }
                }
                Ok(Command::Stop) | Err(RecvTimeoutError::Disconnected) => return,
                Err(RecvTimeoutError::Timeout) => {}
            }
        });
        Self {
            commands: cmd_tx,
            lines: msg_rx,
            handle: Some(handle),
            seq: 0,
        }
    }

    /// Everything the files gained up to now, in delivery order.
    fn flush(&mut self) -> Vec<(String, String)> {
        self.seq += 1;
        let seq = self.seq;
        let mut out = Vec::new();
        if self.commands.send(Command::Flush(seq)).is_err() {
            return out;
        }
        while let Ok(msg) = self.lines.recv() {
            match msg {
                TailMsg::Line { service, text } => out.push((service, text)),
                TailMsg::Flushed(s) if s == seq => break,
                TailMsg::Flushed(_) => {}
            }
        }
        out
    }
}

impl Drop for Tailer {
    fn drop(&mut self) {
        let _ = self.commands.send(Command::Stop);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Executes test cases against a live service.
pub struct LiveExecutor {
    config: LiveConfig,
    base: Url,
    client: Client,
    tailer: Tailer,
    started: Instant,
    last_end: u64,
}

impl LiveExecutor {
    pub fn new(config: LiveConfig) -> Result<Self, LiveConfigError> {
        let base = Url::parse(&config.base_url)
            .map_err(|e| LiveConfigError::Invalid(format!("base_url: {e}")))?;
        let client = Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| LiveConfigError::Invalid(format!("http client: {e}")))?;
        let tailer = Tailer::spawn(config.log_sources.clone());
        Ok(Self {
            config,
            base,
            client,
            tailer,
            started: Instant::now(),
            last_end: 0,
        })
    }

    fn now_ns(&self) -> u64 {
        self.started.elapsed().as_nanos() as u64
    }

    fn endpoint(&self, path: &str) -> Option<&LiveEndpoint> {
        self.config.endpoints.iter().find(|e| e.path == path)
    }

    fn send(
        &self,
        ep: &LiveEndpoint,
        call: &RestCall,
        jar: &mut BTreeMap<String, String>,
    ) -> CallStatus {
        let mut path = ep.path.clone();
        let mut query = Vec::new();
        let mut body = serde_json::Map::new();
        for spec in &ep.params {
            let Some(value) = call.params.get(&spec.name) else {
                continue;
            };
            match spec.location {
                ParamLocation::Path => {
                    path = path.replace(&format!("{{{}}}", spec.name), &value.to_string());
                }
                ParamLocation::Query => query.push((spec.name.clone(), value.to_string())),
                ParamLocation::Body => {
                    let json = match value {
                        ParamValue::Int(v) => serde_json::Value::from(*v),
                        ParamValue::Str(s) => serde_json::Value::from(s.as_str()),
                    };
                    body.insert(spec.name.clone(), json);
                }
            }
        }
        let Ok(mut url) = self.base.join(path.trim_start_matches('/')) else {
            return CallStatus::ConnectionFailed;
        };
        if !query.is_empty() {
            url.query_pairs_mut().extend_pairs(query);
        }
        let method = match call.method {
            Method::Get => reqwest::Method::GET,
            Method::Post => reqwest::Method::POST,
            Method::Put => reqwest::Method::PUT,
            Method::Delete => reqwest::Method::DELETE,
        };
        let mut req = self.client.request(method, url);
        if !body.is_empty() {
            req = req
                .header(CONTENT_TYPE, "application/json")
                .body(serde_json::Value::Object(body).to_string());
        }
        if call.uses_session && !jar.is_empty() {
            let cookie: Vec<String> = jar.iter().map(|(k, v)| format!("{k}={v}")).collect();
            req = req.header(COOKIE, cookie.join("; "));
        }
        match req.send() {
            Ok(resp) => {
                for value in resp.headers().get_all(SET_COOKIE) {
                    if let Some((name, val)) = value
                        .to_str()
                        .ok()
                        .and_then(|v| v.split(';').next())
                        .and_then(|pair| pair.split_once('='))
                    {
                        jar.insert(name.trim().to_string(), val.trim().to_string());
                    }
                }
                CallStatus::Http(resp.status().as_u16())
            }
            Err(e) if e.is_timeout() => CallStatus::Timeout,
            Err(_) => CallStatus::ConnectionFailed,
        }
    }
}

impl Executor for LiveExecutor {
    fn execute(&mut self, test: &TestCase, id: TestId) -> Result<ExecutionResult, ExecError> {
        for call in &test.calls {
            if self.endpoint(&call.endpoint).is_none() {
                return Err(ExecError::UnknownEndpoint(call.endpoint.clone()));
            }
        }
        // lines written between tests belong to no window
        self.tailer.flush();
        let start = self.now_ns().max(self.last_end + 1);
        let mut jar = BTreeMap::new();
        let mut statuses = Vec::with_capacity(test.len());
        let mut covered = BTreeSet::new();
        let mut faults = BTreeSet::new();
        for call in &test.calls {
            let ep = self
                .endpoint(&call.endpoint)
                .expect("checked above")
                .clone();
            let status = self.send(&ep, call, &mut jar);
            if let CallStatus::Http(code) = status {
                covered.insert(TargetId(format!("{}:{}xx", ep.label(), code / 100)));
                if code == 500 {
                    faults.insert(FaultId(format!("{}:500", ep.label())));
                }
            }
            statuses.push(status);
        }
        if self.config.log_settle_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.config.log_settle_ms));
        }
        let lines = self.tailer.flush();
        let n = lines.len() as u64;
        let end = self.now_ns().max(start + n + 1);
        self.last_end = end;
        let span = end - start;
        let events = lines
            .into_iter()
            .enumerate()
            .map(|(i, (service, message))| LogEvent {
                timestamp: start + (i as u64 + 1) * span / (n + 1),
                service,
                message,
            })
            .collect();
        Ok(ExecutionResult {
            statuses,
            events,
            covered,
            faults,
            window: ExecutionWindow {
                test_id: id,
                start,
                end,
            },
        })
    }

    fn reset(&mut self) {}

    fn elapsed_s(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }
}
