//! SPARQL endpoint access with retries and the standard JSON results format.

use std::collections::BTreeMap;
use std::time::Duration;

use lodfm_core::query::{validate_uri, QueryTemplate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RESULTS_JSON: &str = "application/sparql-results+json";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("endpoint unreachable after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed endpoint response: {0}")]
    Parse(String),
    #[error("invalid item: {0}")]
    InvalidItem(String),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparqlEndpointConfig {
    pub endpoint: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further attempt.
    pub backoff_secs: f64,
    pub max_backoff_secs: f64,
    pub max_concurrent: usize,
    pub cache_dir: std::path::PathBuf,
}

impl Default for SparqlEndpointConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://dbpedia.org/sparql".into(),
            timeout_secs: 30.0,
            max_retries: 3,
            backoff_secs: 1.0,
            max_backoff_secs: 30.0,
            max_concurrent: 4,
            cache_dir: "cache".into(),
        }
    }
}

impl SparqlEndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err("timeout must be positive".into());
        }
        if !(self.backoff_secs >= 0.0 && self.max_backoff_secs >= 0.0) {
            return Err("backoff must be non-negative".into());
        }
        if self.max_concurrent == 0 {
            return Err("max_concurrent must be at least 1".into());
        }
        if self.endpoint.is_empty() {
            return Err("endpoint URL is empty".into());
        }
        Ok(())
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let secs = self.backoff_secs * 2f64.powi(retry.saturating_sub(1).min(30) as i32);
        Duration::from_secs_f64(secs.min(self.max_backoff_secs))
    }
}

/// One solution: variable name to term value.
pub type Binding = BTreeMap<String, String>;

#[derive(Deserialize)]
struct ResultsDoc {
    results: ResultsBody,
}

#[derive(Deserialize)]
struct ResultsBody {
    bindings: Vec<BTreeMap<String, Term>>,
}

#[derive(Deserialize)]
struct Term {
    value: String,
}

/// Parses a SPARQL JSON results document into bindings of `vars`.
///
/// Solutions missing one of `vars` are malformed for our templates.
pub fn parse_results(body: &str, vars: &[&str]) -> Result<Vec<Binding>, FetchError> {
    let doc: ResultsDoc = serde_json::from_str(body).map_err(|e| FetchError::Parse(e.to_string()))?;
    doc.results
        .bindings
        .into_iter()
        .map(|solution| {
            vars.iter()
                .map(|&v| {
                    solution
                        .get(v)
                        .map(|t| (v.to_string(), t.value.clone()))
                        .ok_or_else(|| FetchError::Parse(format!("solution lacks ?{v}")))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SparqlClient {
    config: SparqlEndpointConfig,
    http: reqwest::blocking::Client,
}

impl SparqlClient {
    pub fn new(config: SparqlEndpointConfig) -> anyhow::Result<Self> {
        config.validate().map_err(anyhow::Error::msg)?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .user_agent(concat!("lodfm/", env!("CARGO_PKG_VERSION")))
            .build()?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &SparqlEndpointConfig {
        &self.config
    }

    /// Posts `query` and returns the response body, retrying failures.
    pub fn query(&self, query: &str) -> Result<String, FetchError> {
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.config.backoff(attempt - 1));
            }
            let sent = self
                .http
                .post(&self.config.endpoint)
                .header(reqwest::header::ACCEPT, RESULTS_JSON)
                .form(&[("query", query)])
                .send();
            match sent {
                Ok(resp) if resp.status().is_success() => match resp.text() {
                    Ok(body) => return Ok(body),
                    Err(e) => last = e.to_string(),
                },
                Ok(resp) => last = format!("HTTP {}", resp.status()),
                Err(e) => last = e.to_string(),
            }
            log::debug!("attempt {attempt}/{attempts} failed: {last}");
        }
        Err(FetchError::Transport {
            attempts,
            message: last,
        })
    }

    /// Renders `template` for `item_uri` and returns its parsed bindings.
    pub fn select(&self, template: &QueryTemplate, item_uri: &str) -> Result<Vec<Binding>, FetchError> {
        validate_uri(item_uri).map_err(|e| FetchError::InvalidItem(e.to_string()))?;
        let query = template
            .render(item_uri)
            .map_err(|e| FetchError::InvalidItem(e.to_string()))?;
        parse_results(&self.query(&query)?, template.variables())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_standard_results() {
        let body = r#"{"head":{"vars":["p","o"]},"results":{"bindings":[
            {"p":{"type":"uri","value":"http://dbpedia.org/ontology/director"},
             "o":{"type":"uri","value":"http://dbpedia.org/resource/Francis_Ford_Coppola"}}]}}"#;
        let b = parse_results(body, &["p", "o"]).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0]["o"], "http://dbpedia.org/resource/Francis_Ford_Coppola");
        assert!(matches!(parse_results(body, &["s"]), Err(FetchError::Parse(_))));
        assert!(matches!(parse_results("<html>", &["p"]), Err(FetchError::Parse(_))));
    }

    #[test]
    fn backoff_doubles_up_to_cap() {
        let cfg = SparqlEndpointConfig {
            backoff_secs: 0.5,
            max_backoff_secs: 3.0,
            ..Default::default()
        };
        assert_eq!(cfg.backoff(1), Duration::from_millis(500));
        assert_eq!(cfg.backoff(2), Duration::from_secs(1));
        assert_eq!(cfg.backoff(4), Duration::from_secs(3));
    }

    #[test]
    fn config_validation() {
        assert!(SparqlEndpointConfig::default().validate().is_ok());
        let zero = SparqlEndpointConfig {
            max_concurrent: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        let timeout = SparqlEndpointConfig {
            timeout_secs: 0.0,
            ..Default::default()
        };
        assert!(timeout.validate().is_err());
    }
}
