//! Seeded toy catalogs whose relevance is driven by planted item features.
//!
//! Every item belongs to one genre, exposed as a property-object pair.
//! Every user prefers one genre and rates a random subset of items; a rating
//! is positive mostly when the genres match. Subject-property pairs are pure
//! noise, and the PageRank score tracks how often an item gets rated.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{ItemId, RatingRecord, UserId};
use crate::error::{Error, Result};
use crate::knowledge::{apply_pagerank_normalization, ItemKnowledge};
use crate::rng;

pub const GENRE_PROPERTY: &str = "http://dbpedia.org/ontology/genre";
pub const NOISE_PROPERTY: &str = "http://dbpedia.org/ontology/wikiPageWikiLink";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    pub genres: usize,
    /// Ratings per user.
    pub ratings_per_user: usize,
    /// Probability of a positive rating when the genres match.
    pub match_positive: f64,
    /// Probability of a positive rating when they do not.
    pub mismatch_positive: f64,
    /// Exponent of the Zipf-like exposure weights used to pick rated items.
    pub popularity_skew: f64,
    /// Noise subject-property pairs per item.
    pub noise_pairs: usize,
    pub noise_pool: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users: 200,
            items: 100,
            genres: 5,
            ratings_per_user: 40,
            match_positive: 0.9,
            mismatch_positive: 0.1,
            popularity_skew: 0.5,
            noise_pairs: 3,
            noise_pool: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub records: Vec<RatingRecord>,
    pub uris: BTreeMap<ItemId, String>,
    /// Knowledge with normalized PageRank already applied.
    pub knowledge: BTreeMap<ItemId, ItemKnowledge>,
    pub item_genre: BTreeMap<ItemId, usize>,
    pub user_genre: BTreeMap<UserId, usize>,
}

pub fn item_uri(item: ItemId) -> String {
    format!("http://example.org/resource/Item_{}", item.0)
}

pub fn genre_uri(genre: usize) -> String {
    format!("http://example.org/resource/Genre_{genre}")
}

/// Users are `1..=users`, items `1..=items`; ratings are 5 (positive) or 1.
pub fn generate(config: &SyntheticConfig, seed: u64) -> Result<SyntheticData> {
    if config.users == 0 || config.items == 0 || config.genres == 0 {
        return Err(Error::InvalidArgument("users, items and genres must be positive".into()));
    }
    if config.ratings_per_user == 0 || config.ratings_per_user > config.items {
        return Err(Error::InvalidArgument("ratings_per_user must lie in 1..=items".into()));
    }
    if config.noise_pairs > config.noise_pool {
        return Err(Error::InvalidArgument("noise_pairs exceeds noise_pool".into()));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SYNTHETIC);
    let items: Vec<ItemId> = (1..=config.items as u32).map(ItemId).collect();
    let weights: Vec<f64> = (0..config.items)
        .map(|k| libm::pow(k as f64 + 1.0, -config.popularity_skew))
        .collect();
    // exposure rank is a random permutation so popularity is not tied to id
    let mut exposure: Vec<usize> = (0..config.items).collect();
    rand::seq::SliceRandom::shuffle(exposure.as_mut_slice(), &mut rng);

    let item_genre: BTreeMap<ItemId, usize> = items
        .iter()
        .enumerate()
        .map(|(k, &i)| (i, k % config.genres))
        .collect();

    let mut records = Vec::with_capacity(config.users * config.ratings_per_user);
    let mut user_genre = BTreeMap::new();
    let mut exposure_counts = alloc::vec![0usize; config.items];
    for u in 1..=config.users as u32 {
        let user = UserId(u);
        let genre = rng.random_range(0..config.genres);
        user_genre.insert(user, genre);
        let mut available: Vec<usize> = (0..config.items).collect();
        for t in 0..config.ratings_per_user {
            let total: f64 = available.iter().map(|&k| weights[exposure[k]]).sum();
            let mut target = rng.random::<f64>() * total;
            let mut pick = available.len() - 1;
            for (slot, &k) in available.iter().enumerate() {
                target -= weights[exposure[k]];
                if target <= 0.0 {
                    pick = slot;
                    break;
                }
            }
            let k = available.swap_remove(pick);
            exposure_counts[k] += 1;
            let item = items[k];
            let p = if item_genre[&item] == genre {
                config.match_positive
            } else {
                config.mismatch_positive
            };
            let rating = if rng.random::<f64>() < p { 5.0 } else { 1.0 };
            records.push(RatingRecord {
                user,
                item,
                rating,
                timestamp: t as i64,
            });
        }
    }

    let mut knowledge = BTreeMap::new();
    let mut uris = BTreeMap::new();
    for (k, &item) in items.iter().enumerate() {
        let uri = item_uri(item);
        let po = alloc::vec![(String::from(GENRE_PROPERTY), genre_uri(item_genre[&item]))];
        let mut sp = Vec::with_capacity(config.noise_pairs);
        while sp.len() < config.noise_pairs {
            let s = format!("http://example.org/resource/Noise_{}", rng.random_range(0..config.noise_pool));
            let pair = (s, String::from(NOISE_PROPERTY));
            if !sp.contains(&pair) {
                sp.push(pair);
            }
        }
        let jitter = 0.8 + 0.4 * rng.random::<f64>();
        let pagerank = (exposure_counts[k] as f64 + 1.0) * jitter;
        knowledge.insert(item, ItemKnowledge::new(po, sp, Some(pagerank))?);
        uris.insert(item, uri);
    }
    apply_pagerank_normalization(&mut knowledge)?;
    Ok(SyntheticData {
        records,
        uris,
        knowledge,
        item_genre,
        user_genre,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg, 1).unwrap();
        assert_eq!(a.records.len(), 200 * 40);
        assert_eq!(a.knowledge.len(), 100);
        assert_eq!(a, generate(&cfg, 1).unwrap());
        assert_ne!(a.records, generate(&cfg, 2).unwrap().records);
        let max = a.knowledge.values().filter_map(|k| k.pagerank).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn genre_matches_are_mostly_positive() {
        let d = generate(&SyntheticConfig::default(), 3).unwrap();
        let (mut hit, mut n) = (0, 0);
        for r in &d.records {
            if d.item_genre[&r.item] == d.user_genre[&r.user] {
                n += 1;
                hit += usize::from(r.rating > 3.0);
            }
        }
        assert!(hit as f64 / n as f64 > 0.8);
    }
}
