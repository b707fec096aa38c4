use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::math;

/// One user's ranking, best first, with binary relevance flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user: UserId,
    pub items: Vec<ItemId>,
    pub relevant: Vec<bool>,
    /// All relevant items of the user, ranked or not.
    pub relevant_total: usize,
}

impl RankedList {
    pub fn new(
        user: UserId,
        items: Vec<ItemId>,
        relevant: Vec<bool>,
        relevant_total: usize,
    ) -> Result<Self> {
        if items.len() != relevant.len() {
            return Err(Error::LengthMismatch {
                left: items.len(),
                right: relevant.len(),
            });
        }
        if items.iter().collect::<BTreeSet<_>>().len() != items.len() {
            return Err(Error::InvalidArgument("ranked list repeats an item".into()));
        }
        if relevant.iter().filter(|&&r| r).count() > relevant_total {
            return Err(Error::InvalidArgument(
                "more relevant items ranked than the user has".into(),
            ));
        }
        Ok(Self {
            user,
            items,
            relevant,
            relevant_total,
        })
    }

    /// A list from relevance flags alone; items are numbered by position.
    pub fn from_relevance(relevant: &[bool], relevant_total: usize) -> Result<Self> {
        let items = (0..relevant.len() as u32).map(ItemId).collect();
        Self::new(UserId(0), items, relevant.to_vec(), relevant_total)
    }

    /// Sorts candidates by descending score, ties by ascending item id.
    pub fn from_scores(
        user: UserId,
        mut scored: Vec<(ItemId, f64)>,
        relevant: &BTreeSet<ItemId>,
    ) -> Result<Self> {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let flags = scored.iter().map(|(i, _)| relevant.contains(i)).collect();
        Self::new(
            user,
            scored.into_iter().map(|(i, _)| i).collect(),
            flags,
            relevant.len(),
        )
    }

    fn hits_at(&self, n: usize) -> usize {
        self.relevant.iter().take(n).filter(|&&r| r).count()
    }

    fn require_relevant(&self) -> Result<()> {
        if self.relevant_total == 0 {
            Err(Error::NoRelevantItems)
        } else {
            Ok(())
        }
    }
}

fn check_cutoff(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("cutoff must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Hits in the top `n` over `n`; missing slots count as misses.
pub fn precision_at_n(list: &RankedList, n: usize) -> Result<f64> {
    check_cutoff(n)?;
    Ok(list.hits_at(n) as f64 / n as f64)
}

pub fn recall_at_n(list: &RankedList, n: usize) -> Result<f64> {
    check_cutoff(n)?;
    list.require_relevant()?;
    Ok(list.hits_at(n) as f64 / list.relevant_total as f64)
}

/// Binary-gain nDCG: gains `2^r − 1` discounted by `log2(1 + rank)`.
pub fn ndcg_at_n(list: &RankedList, n: usize) -> Result<f64> {
    check_cutoff(n)?;
    list.require_relevant()?;
    let discount = |rank: usize| 1.0 / math::log2(1.0 + rank as f64);
    let dcg = list
        .relevant
        .iter()
        .take(n)
        .enumerate()
        .filter(|(_, &r)| r)
        .fold(0.0, |acc, (k, _)| acc + discount(k + 1));
    let ideal: f64 = (1..=n.min(list.relevant_total)).map(discount).sum();
    Ok(dcg / ideal)
}

/// `1 / rank` of the first relevant item. Lists whose relevant items never
/// appear report [`Error::NoRelevantItems`] and drop out of [`mrr`].
pub fn reciprocal_rank(list: &RankedList) -> Result<f64> {
    list.require_relevant()?;
    list.relevant
        .iter()
        .position(|&r| r)
        .map(|k| 1.0 / (k + 1) as f64)
        .ok_or(Error::NoRelevantItems)
}

/// `Σ_n P@n · like(n) / |I|` over the whole list.
pub fn average_precision(list: &RankedList) -> Result<f64> {
    list.require_relevant()?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &r) in list.relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / list.relevant_total as f64)
}

fn mean_over(lists: &[RankedList], f: impl Fn(&RankedList) -> Result<f64>) -> Result<f64> {
    let values: Vec<f64> = lists.iter().filter_map(|l| f(l).ok()).collect();
    if values.is_empty() {
        return Err(Error::Degenerate("no user with relevant items".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn mrr(lists: &[RankedList]) -> Result<f64> {
    mean_over(lists, reciprocal_rank)
}

pub fn mean_average_precision(lists: &[RankedList]) -> Result<f64> {
    mean_over(lists, average_precision)
}
