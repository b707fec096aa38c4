//! Cached per-item knowledge retrieval.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use lodfm_core::query::QueryTemplate;
use lodfm_core::{FeatureConfig, FeatureSet, ItemKnowledge};
use serde::{Deserialize, Serialize};

use crate::cache::{CacheEntry, FeatureCache};
use crate::sparql::{Binding, FetchError, SparqlClient};

fn pairs(bindings: &[Binding], template: &QueryTemplate, first: &str, second: &str, property: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = bindings
        .iter()
        .filter(|b| template.keeps_property(&b[property]))
        .map(|b| (b[first].clone(), b[second].clone()))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Distinct `(property, object)` pairs without the excluded properties.
pub fn po_pairs(bindings: &[Binding]) -> Vec<(String, String)> {
    pairs(bindings, &QueryTemplate::PO, "p", "o", "p")
}

/// Distinct `(subject, property)` pairs without the excluded properties.
pub fn sp_pairs(bindings: &[Binding]) -> Vec<(String, String)> {
    pairs(bindings, &QueryTemplate::SP, "s", "p", "p")
}

/// The first `?score` binding, if any.
pub fn pagerank(bindings: &[Binding]) -> Result<Option<f64>, FetchError> {
    let Some(b) = bindings.first() else {
        return Ok(None);
    };
    let raw = &b["score"];
    let score: f64 = raw
        .trim()
        .parse()
        .map_err(|_| FetchError::Parse(format!("PageRank score {raw:?} is not a number")))?;
    if !score.is_finite() || score < 0.0 {
        return Err(FetchError::Parse(format!("PageRank score {raw:?} must be finite and non-negative")));
    }
    Ok(Some(score))
}

fn check_bindings(template: &QueryTemplate, bindings: &[Binding]) -> Result<(), FetchError> {
    if template.set == FeatureSet::Pr {
        pagerank(bindings)?;
    }
    Ok(())
}

/// Reads through the cache; when a client is present, misses go to the endpoint.
#[derive(Debug)]
pub struct Fetcher {
    client: Option<SparqlClient>,
    cache: FeatureCache,
    network_fetches: AtomicUsize,
}

impl Fetcher {
    pub fn new(client: Option<SparqlClient>, cache: FeatureCache) -> Self {
        Self {
            client,
            cache,
            network_fetches: AtomicUsize::new(0),
        }
    }

    pub fn cache(&self) -> &FeatureCache {
        &self.cache
    }

    /// Template queries answered by the endpoint rather than the cache.
    pub fn network_fetches(&self) -> usize {
        self.network_fetches.load(Ordering::Relaxed)
    }

    pub fn bindings(&self, template: &QueryTemplate, item_uri: &str) -> Result<Vec<Binding>, FetchError> {
        if let Some(entry) = self.cache.load(template.id(), item_uri)? {
            return Ok(entry.bindings);
        }
        let Some(client) = &self.client else {
            return Err(FetchError::Transport {
                attempts: 0,
                message: format!("{} features for {item_uri} are not cached and no endpoint is configured", template.id()),
            });
        };
        self.network_fetches.fetch_add(1, Ordering::Relaxed);
        let bindings = client.select(template, item_uri)?;
        check_bindings(template, &bindings)?;
        let fetched_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        self.cache.store(&CacheEntry {
            item: item_uri.to_string(),
            template: template.id().to_string(),
            bindings: bindings.clone(),
            fetched_at,
        })?;
        Ok(bindings)
    }

    pub fn fetch_po(&self, item_uri: &str) -> Result<Vec<(String, String)>, FetchError> {
        Ok(po_pairs(&self.bindings(&QueryTemplate::PO, item_uri)?))
    }

    pub fn fetch_sp(&self, item_uri: &str) -> Result<Vec<(String, String)>, FetchError> {
        Ok(sp_pairs(&self.bindings(&QueryTemplate::SP, item_uri)?))
    }

    pub fn fetch_pagerank(&self, item_uri: &str) -> Result<Option<f64>, FetchError> {
        pagerank(&self.bindings(&QueryTemplate::PR, item_uri)?)
    }

    /// Knowledge for the requested sets; the others stay empty.
    pub fn fetch_item(&self, item_uri: &str, sets: FeatureConfig) -> Result<ItemKnowledge, FetchError> {
        let po = if sets.po { self.fetch_po(item_uri)? } else { Vec::new() };
        let sp = if sets.sp { self.fetch_sp(item_uri)? } else { Vec::new() };
        let pr = if sets.pr { self.fetch_pagerank(item_uri)? } else { None };
        ItemKnowledge::new(po, sp, pr).map_err(|e| FetchError::Parse(e.to_string()))
    }

    /// Fetches every item with up to `max_concurrent` workers. Failures are
    /// collected per item; each finished fetch is already cached.
    pub fn fetch_all(&self, items: &[String], sets: FeatureConfig, max_concurrent: usize) -> FetchReport {
        let next = AtomicUsize::new(0);
        let done = Mutex::new(BTreeMap::new());
        let failed = Mutex::new(BTreeMap::new());
        std::thread::scope(|scope| {
            for _ in 0..max_concurrent.max(1).min(items.len().max(1)) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(uri) = items.get(k) else { break };
                    match self.fetch_item(uri, sets) {
                        Ok(knowledge) => {
                            done.lock().unwrap().insert(uri.clone(), knowledge);
                        }
                        Err(e) => {
                            log::warn!("{uri}: {e}");
                            failed.lock().unwrap().insert(uri.clone(), e.to_string());
                        }
                    }
                });
            }
        });
        FetchReport {
            knowledge: done.into_inner().unwrap(),
            failures: failed
                .into_inner()
                .unwrap()
                .into_iter()
                .map(|(item, message)| FetchFailure { item, message })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchFailure {
    pub item: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FetchReport {
    pub knowledge: BTreeMap<String, ItemKnowledge>,
    pub failures: Vec<FetchFailure>,
}

/// Turns knowledge back into the bindings the templates would have returned.
pub fn knowledge_to_bindings(knowledge: &ItemKnowledge) -> [(QueryTemplate, Vec<Binding>); 3] {
    let pair = |a: &str, x: &str, b: &str, y: &str| Binding::from([(a.to_string(), x.to_string()), (b.to_string(), y.to_string())]);
    let po = knowledge.po.iter().map(|(p, o)| pair("p", p, "o", o)).collect();
    let sp = knowledge.sp.iter().map(|(s, p)| pair("s", s, "p", p)).collect();
    let pr = knowledge
        .pagerank_raw
        .map(|s| Binding::from([("score".to_string(), s.to_string())]))
        .into_iter()
        .collect();
    [(QueryTemplate::PO, po), (QueryTemplate::SP, sp), (QueryTemplate::PR, pr)]
}
