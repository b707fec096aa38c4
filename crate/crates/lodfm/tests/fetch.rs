mod common;

use std::time::Duration;

use common::{empty, results, FixtureServer, Kind};
use lodfm::cache::FeatureCache;
use lodfm::fetch::Fetcher;
use lodfm::sparql::{FetchError, SparqlClient, SparqlEndpointConfig, RESULTS_JSON};
use lodfm_core::query::{DCT_SUBJECT, PO_EXCLUDED, SP_EXCLUDED};
use lodfm_core::FeatureConfig;

const GODFATHER: &str = "http://dbpedia.org/resource/The_Godfather";
const DIRECTOR: &str = "http://dbpedia.org/ontology/director";
const COPPOLA: &str = "http://dbpedia.org/resource/Francis_Ford_Coppola";

fn fetcher(server: &FixtureServer, cache: &std::path::Path, retries: u32) -> Fetcher {
    let cfg = SparqlEndpointConfig {
        endpoint: server.url.clone(),
        timeout_secs: 5.0,
        max_retries: retries,
        backoff_secs: 0.01,
        max_backoff_secs: 0.05,
        max_concurrent: 4,
        cache_dir: cache.into(),
    };
    Fetcher::new(Some(SparqlClient::new(cfg).unwrap()), FeatureCache::new(cache))
}

fn godfather_graph(kind: Kind) -> String {
    match kind {
        Kind::Po => results(
            &["p", "o"],
            &[
                &[DIRECTOR, COPPOLA],
                &[DCT_SUBJECT, "http://dbpedia.org/resource/Category:1972_films"],
                &[PO_EXCLUDED[0], "http://dbpedia.org/resource/Godfather"],
            ],
        ),
        Kind::Sp => results(
            &["s", "p"],
            &[
                &["http://dbpedia.org/resource/Carlo_Savina", "http://dbpedia.org/ontology/knownFor"],
                &["http://dbpedia.org/resource/The_Godfather_(disambiguation)", SP_EXCLUDED[2]],
            ],
        ),
        Kind::Pr => results(&["score"], &[&["273.5"]]),
    }
}

#[test]
fn outgoing_and_incoming_pairs_without_excluded_properties() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| {
        assert_eq!(r.accept, RESULTS_JSON);
        assert!(r.query.contains(GODFATHER));
        (200, godfather_graph(r.kind))
    });
    let f = fetcher(&server, dir.path(), 0);
    let po = f.fetch_po(GODFATHER).unwrap();
    assert_eq!(
        po,
        vec![
            (DIRECTOR.to_string(), COPPOLA.to_string()),
            (DCT_SUBJECT.to_string(), "http://dbpedia.org/resource/Category:1972_films".to_string()),
        ]
    );
    let sp = f.fetch_sp(GODFATHER).unwrap();
    assert_eq!(sp, vec![("http://dbpedia.org/resource/Carlo_Savina".to_string(), "http://dbpedia.org/ontology/knownFor".to_string())]);
    assert_eq!(f.fetch_pagerank(GODFATHER).unwrap(), Some(273.5));
    assert_eq!(server.requests(), 3);
    // warm cache answers without the endpoint
    let k1 = f.fetch_item(GODFATHER, FeatureConfig::ALL).unwrap();
    assert_eq!(server.requests(), 3);
    let offline = Fetcher::new(None, FeatureCache::new(dir.path()));
    assert_eq!(offline.fetch_item(GODFATHER, FeatureConfig::ALL).unwrap(), k1);
}

#[test]
fn two_known_bindings_and_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| match r.kind {
        Kind::Po => (200, results(&["p", "o"], &[&["http://x/p2", "http://x/o"], &["http://x/p1", "http://x/o"]])),
        Kind::Sp => (200, results(&["s", "p"], &[&["http://x/a", "http://x/p"], &["http://x/b", "http://x/p"], &["http://x/a", "http://x/p"], &["http://x/c", "http://x/p"]])),
        Kind::Pr => (200, empty(Kind::Pr)),
    });
    let f = fetcher(&server, dir.path(), 0);
    let po = f.fetch_po("http://x/item").unwrap();
    assert_eq!(po, vec![("http://x/p1".into(), "http://x/o".into()), ("http://x/p2".into(), "http://x/o".into())]);
    assert_eq!(f.fetch_sp("http://x/item").unwrap().len(), 3);
    assert_eq!(f.fetch_pagerank("http://x/item").unwrap(), None);
}

#[test]
fn zero_bindings_give_empty_results() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| (200, empty(r.kind)));
    let f = fetcher(&server, dir.path(), 0);
    let k = f.fetch_item("http://x/item", FeatureConfig::ALL).unwrap();
    assert!(k.po.is_empty() && k.sp.is_empty() && k.pagerank_raw.is_none());
}

#[test]
fn bad_scores_and_bodies_leave_the_cache_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| match r.kind {
        Kind::Pr if r.query.contains("negative") => (200, results(&["score"], &[&["-2.0"]])),
        Kind::Pr => (200, results(&["score"], &[&["lots"]])),
        _ => (200, "<html>busy</html>".into()),
    });
    let f = fetcher(&server, dir.path(), 0);
    assert!(matches!(f.fetch_pagerank("http://x/negative"), Err(FetchError::Parse(_))));
    assert!(matches!(f.fetch_pagerank("http://x/word"), Err(FetchError::Parse(_))));
    assert!(matches!(f.fetch_po("http://x/word"), Err(FetchError::Parse(_))));
    assert_eq!(std::fs::read_dir(dir.path()).map_or(0, |d| d.count()), 0);
}

#[test]
fn transport_failures_count_attempts() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |_| (503, "overloaded".into()));
    let f = fetcher(&server, dir.path(), 2);
    match f.fetch_po("http://x/item") {
        Err(FetchError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
    assert_eq!(server.requests(), 3);
    assert!(FeatureCache::new(dir.path()).load("PO", "http://x/item").unwrap().is_none());
}

#[test]
fn transient_failures_are_retried() {
    let dir = tempfile::tempdir().unwrap();
    let calls = std::sync::atomic::AtomicUsize::new(0);
    let server = FixtureServer::start(Duration::ZERO, move |r| {
        if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) < 2 {
            (500, String::new())
        } else {
            (200, empty(r.kind))
        }
    });
    let f = fetcher(&server, dir.path(), 3);
    assert!(f.fetch_po("http://x/item").unwrap().is_empty());
    assert_eq!(server.requests(), 3);
}

#[test]
fn injection_attempts_are_rejected_before_any_request() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| (200, empty(r.kind)));
    let f = fetcher(&server, dir.path(), 0);
    assert!(matches!(f.fetch_po("http://x/a> } DROP ALL {<http://x/b"), Err(FetchError::InvalidItem(_))));
    assert_eq!(server.requests(), 0);
}

fn items(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("http://x/item{k}")).collect()
}

#[test]
fn cached_batch_needs_no_requests() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| (200, godfather_graph(r.kind)));
    let f = fetcher(&server, dir.path(), 0);
    let list = items(3);
    let first = f.fetch_all(&list, FeatureConfig::ALL, 2);
    assert_eq!(server.requests(), 9);
    let again = f.fetch_all(&list, FeatureConfig::ALL, 2);
    assert_eq!(server.requests(), 9);
    assert_eq!(again.knowledge.len(), 3);
    assert_eq!(again, first);
}

#[test]
fn permanent_failure_is_reported_per_item() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| {
        if r.query.contains("item1") {
            (404, String::new())
        } else {
            (200, godfather_graph(r.kind))
        }
    });
    let f = fetcher(&server, dir.path(), 1);
    let report = f.fetch_all(&items(2), FeatureConfig::ALL, 2);
    assert_eq!(report.knowledge.len(), 1);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].item, "http://x/item1");
}

#[test]
fn interrupted_batch_resumes_from_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::ZERO, |r| (200, godfather_graph(r.kind)));
    let f = fetcher(&server, dir.path(), 0);
    let list = items(100);
    f.fetch_all(&list[..50], FeatureConfig::ALL, 4);
    let before = server.requests();
    let report = f.fetch_all(&list, FeatureConfig::ALL, 4);
    assert_eq!(report.knowledge.len(), 100);
    assert_eq!(server.requests() - before, 50 * 3);
}

#[test]
fn concurrency_limit_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let server = FixtureServer::start(Duration::from_millis(20), |r| (200, empty(r.kind)));
    let f = fetcher(&server, dir.path(), 0);
    let report = f.fetch_all(&items(12), FeatureConfig::PO, 3);
    assert_eq!(report.knowledge.len(), 12);
    let peak = server.max_in_flight.load(std::sync::atomic::Ordering::SeqCst);
    assert!((1..=3).contains(&peak), "peak {peak}");
}
