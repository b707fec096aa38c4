#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

/// Which template a request body carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Po,
    Sp,
    Pr,
}

pub struct Request {
    pub kind: Kind,
    pub query: String,
    pub accept: String,
}

pub type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

/// A local SPARQL endpoint answering from a closure.
pub struct FixtureServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    pub max_in_flight: Arc<AtomicUsize>,
    server: Arc<tiny_http::Server>,
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut k = 0;
    while k < bytes.len() {
        match bytes[k] {
            b'+' => out.push(b' '),
            b'%' if k + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[k + 1..k + 3]).unwrap();
                out.push(u8::from_str_radix(hex, 16).unwrap());
                k += 2;
            }
            b => out.push(b),
        }
        k += 1;
    }
    String::from_utf8(out).unwrap()
}

impl FixtureServer {
    pub fn start(delay: Duration, handler: impl Fn(&Request) -> (u16, String) + Send + Sync + 'static) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}/sparql", server.server_addr().to_ip().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let max_in_flight = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        {
            let (server, requests, max_in_flight) = (server.clone(), requests.clone(), max_in_flight.clone());
            thread::spawn(move || {
                for mut req in server.incoming_requests() {
                    let (requests, max_in_flight, in_flight, handler) =
                        (requests.clone(), max_in_flight.clone(), in_flight.clone(), handler.clone());
                    thread::spawn(move || {
                        let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                        max_in_flight.fetch_max(now, Ordering::SeqCst);
                        requests.fetch_add(1, Ordering::SeqCst);
                        let mut body = String::new();
                        req.as_reader().read_to_string(&mut body).unwrap();
                        let query = body
                            .split('&')
                            .find_map(|kv| kv.strip_prefix("query="))
                            .map(percent_decode)
                            .unwrap_or_default();
                        let kind = if query.contains("rankValue") {
                            Kind::Pr
                        } else if query.contains("SELECT DISTINCT ?s ?p") {
                            Kind::Sp
                        } else {
                            Kind::Po
                        };
                        let accept = req
                            .headers()
                            .iter()
                            .find(|h| h.field.equiv("Accept"))
                            .map(|h| h.value.to_string())
                            .unwrap_or_default();
                        thread::sleep(delay);
                        let (status, text) = handler(&Request { kind, query, accept });
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                        let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(status));
                    });
                }
            });
        }
        Self {
            url,
            requests,
            max_in_flight,
            server,
        }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
    }
}

/// A SPARQL JSON results document with URI terms (literal for `score`).
pub fn results(vars: &[&str], rows: &[&[&str]]) -> String {
    let bindings: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            for (v, value) in vars.iter().zip(row.iter()) {
                let kind = if *v == "score" { "literal" } else { "uri" };
                obj.insert(v.to_string(), serde_json::json!({"type": kind, "value": value}));
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::json!({"head": {"vars": vars}, "results": {"bindings": bindings}}).to_string()
}

pub fn empty(kind: Kind) -> String {
    match kind {
        Kind::Po => results(&["p", "o"], &[]),
        Kind::Sp => results(&["s", "p"], &[]),
        Kind::Pr => results(&["score"], &[]),
    }
}
