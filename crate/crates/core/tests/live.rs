use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};

use mish_core::api::{Method, ParamValue, RestCall, TestCase};
use mish_core::engine::{self, Algorithm, Budget, SearchConfig};
use mish_core::exec::{CallStatus, ExecError, Executor, FaultId, TargetId};
use mish_core::fitness::FitnessKind;
use mish_core::http::{LiveConfig, LiveExecutor};
use mish_core::templates::{TemplateId, TemplateTree};
use mish_core::trace::{build_traces, TestId};

struct Request {
    method: String,
    target: String,
    cookie: Option<String>,
    body: String,
}

fn read_request(stream: &mut TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut first = String::new();
    reader.read_line(&mut first).ok()?;
    let mut parts = first.split_whitespace();
    let method = parts.next()?.to_string();
    let target = parts.next()?.to_string();
    let mut length = 0;
    let mut cookie = None;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        let (name, value) = line.split_once(':')?;
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().ok()?,
            "cookie" => cookie = Some(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some(Request {
        method,
        target,
        cookie,
        body: String::from_utf8_lossy(&body).into_owned(),
    })
}

fn log(path: &Path, line: &str) {
    let mut f = std::fs::OpenOptions::new().append(true).open(path).unwrap();
    writeln!(f, "{line}").unwrap();
}

/// Tiny service: `/login` hands out a cookie, `/me` requires it and
/// `/items/{id}` crashes on id 7. Every handled request writes one log line
/// before answering.
fn serve(listener: TcpListener, log_path: PathBuf) {
    for stream in listener.incoming() {
        let Ok(mut stream) = stream else { continue };
        let Some(req) = read_request(&mut stream) else {
            continue;
        };
        let path = req.target.split('?').next().unwrap().to_string();
        let (status, extra, line) = match (req.method.as_str(), path.as_str()) {
            ("POST", "/login") => (
                200,
                "Set-Cookie: sid=s3cret; Path=/\r\n",
                format!("login accepted body={}", req.body.len()),
            ),
            ("GET", "/me") if req.cookie.as_deref() == Some("sid=s3cret") => {
                (200, "", "profile served".to_string())
            }
            ("GET", "/me") => (401, "", "profile refused".to_string()),
            ("GET", p) if p.starts_with("/items/") => {
                let id = &p["/items/".len()..];
                if id == "7" {
                    (500, "", format!("item lookup crashed id={id}"))
                } else {
                    (200, "", format!("item fetched id={id}"))
                }
            }
            _ => (404, "", "no route".to_string()),
        };
        log(&log_path, &line);
        let reply =
            format!("HTTP/1.1 {status} X\r\n{extra}Content-Length: 0\r\nConnection: close\r\n\r\n");
        let _ = stream.write_all(reply.as_bytes());
    }
}

fn config(base_url: &str, log: &Path) -> LiveConfig {
    let text = format!(
        r#"
        schema_version = 1
        name = "toy"
        base_url = "{base_url}"
        timeout_ms = 1000
        log_sources = ["{}"]

        [[endpoints]]
        name = "login"
        path = "/login"
        methods = ["POST"]
        login = true
        params = [{{ name = "user", one_of = ["ann", "bob"], in = "body" }}]

        [[endpoints]]
        name = "me"
        path = "/me"
        methods = ["GET"]

        [[endpoints]]
        name = "item"
        path = "/items/{{id}}"
        methods = ["GET"]
        params = [{{ name = "id", int = [0, 9], in = "path" }}]
        "#,
        log.display()
    );
    LiveConfig::from_toml_str(&text).unwrap()
}

fn start_server(dir: &Path) -> (String, PathBuf) {
    let log_path = dir.join("toy.log");
    std::fs::write(&log_path, "").unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let p = log_path.clone();
    std::thread::spawn(move || serve(listener, p));
    (url, log_path)
}

fn call(method: Method, endpoint: &str, params: &[(&str, ParamValue)], session: bool) -> RestCall {
    RestCall {
        method,
        endpoint: endpoint.to_string(),
        params: params
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect::<BTreeMap<_, _>>(),
        uses_session: session,
    }
}

fn targets(ids: &[&str]) -> Vec<TargetId> {
    ids.iter().map(|s| TargetId(s.to_string())).collect()
}

#[test]
fn session_cookie_is_replayed_within_a_test() {
    let dir = tempfile::tempdir().unwrap();
    let (url, log) = start_server(dir.path());
    let mut exec = LiveExecutor::new(config(&url, &log)).unwrap();

    let login = call(
        Method::Post,
        "/login",
        &[("user", ParamValue::Str("ann".into()))],
        false,
    );
    let test = TestCase {
        calls: vec![login.clone(), call(Method::Get, "/me", &[], true)],
    };
    let r = exec.execute(&test, TestId(1)).unwrap();
    assert_eq!(r.statuses, [CallStatus::Http(200), CallStatus::Http(200)]);
    assert_eq!(
        r.covered.iter().cloned().collect::<Vec<_>>(),
        targets(&["login:2xx", "me:2xx"])
    );
    let messages: Vec<&str> = r.events.iter().map(|e| e.message.as_str()).collect();
    assert_eq!(messages.len(), 2);
    assert!(messages[0].starts_with("login accepted"));
    assert_eq!(messages[1], "profile served");
    assert!(r.events.iter().all(|e| r.window.contains(e.timestamp)));
    assert!(r.events.iter().all(|e| e.service == "toy"));

    // the cookie does not leak into the next test
    let next = TestCase {
        calls: vec![call(Method::Get, "/me", &[], true)],
    };
    let r2 = exec.execute(&next, TestId(2)).unwrap();
    assert_eq!(r2.statuses, [CallStatus::Http(401)]);
    assert!(r2.covered.contains(&TargetId("me:4xx".into())));
    assert!(r2.window.start > r.window.end);
}

#[test]
fn server_errors_are_faults() {
    let dir = tempfile::tempdir().unwrap();
    let (url, log) = start_server(dir.path());
    let mut exec = LiveExecutor::new(config(&url, &log)).unwrap();
    let test = TestCase {
        calls: vec![
            call(
                Method::Get,
                "/items/{id}",
                &[("id", ParamValue::Int(3))],
                false,
            ),
            call(
                Method::Get,
                "/items/{id}",
                &[("id", ParamValue::Int(7))],
                false,
            ),
        ],
    };
    let r = exec.execute(&test, TestId(0)).unwrap();
    assert_eq!(r.statuses, [CallStatus::Http(200), CallStatus::Http(500)]);
    assert!(r.faults.contains(&FaultId("item:500".into())));
    assert!(r.covered.contains(&TargetId("item:5xx".into())));
    assert_eq!(r.events[1].message, "item lookup crashed id=7");
}

#[test]
fn unknown_endpoint_is_rejected_before_sending() {
    let dir = tempfile::tempdir().unwrap();
    let (url, log) = start_server(dir.path());
    let mut exec = LiveExecutor::new(config(&url, &log)).unwrap();
    let test = TestCase {
        calls: vec![call(Method::Get, "/nowhere", &[], false)],
    };
    assert!(matches!(
        exec.execute(&test, TestId(0)),
        Err(ExecError::UnknownEndpoint(_))
    ));
    assert_eq!(std::fs::read_to_string(&log).unwrap(), "");
}

#[test]
fn unreachable_service_yields_a_none_trace() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("down.log");
    std::fs::write(&log, "").unwrap();
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut exec = LiveExecutor::new(config(&format!("http://127.0.0.1:{port}"), &log)).unwrap();
    let test = TestCase {
        calls: vec![call(Method::Get, "/me", &[], false)],
    };
    let r = exec.execute(&test, TestId(4)).unwrap();
    assert_eq!(r.statuses, [CallStatus::ConnectionFailed]);
    assert!(r.covered.is_empty() && r.events.is_empty());

    let mut tree = TemplateTree::default();
    let batch = build_traces(&r.events, &[r.window], &mut tree).unwrap();
    assert_eq!(batch.traces[0].symbols, [TemplateId::NONE]);
}

#[test]
fn search_runs_against_a_live_service() {
    let dir = tempfile::tempdir().unwrap();
    let (url, log) = start_server(dir.path());
    let mut exec = LiveExecutor::new(config(&url, &log)).unwrap();
    let cfg = SearchConfig {
        population: 6,
        budget: Budget::Generations(3),
        seed: 2,
        ..SearchConfig::default()
    };
    let schema = config(&url, &log).api_schema();
    let outcome = engine::run(
        Algorithm::Mish(FitnessKind::LowerThanMedian),
        cfg,
        schema,
        &mut exec,
        "toy",
    )
    .unwrap();
    assert_eq!(outcome.report.generations, 3);
    assert!(!outcome.report.covered.is_empty());
    let model = outcome.model.unwrap();
    assert_eq!(model.total_traces(), outcome.report.evaluations);
    model.validate().unwrap();
}
