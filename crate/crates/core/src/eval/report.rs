use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::{
    average_precision, ndcg_at_n, precision_at_n, recall_at_n, reciprocal_rank, RankedList,
};
use crate::dataset::{InteractionDataset, Partition, UserId};
use crate::error::{Error, Result};

/// Scores every catalog item for a user, addressed by dense positions.
pub trait Recommender {
    fn num_items(&self) -> usize;

    /// Writes one score per item into `scores` (length [`Self::num_items`]).
    fn score_user(&self, user: usize, scores: &mut [f64]);
}

/// Items ranked for each test user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSet {
    /// Every catalog item the user has no training interaction with.
    #[default]
    All,
    /// Only the user's test items.
    TestOnly,
}

impl core::str::FromStr for CandidateSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CandidateSet::All),
            "test-only" => Ok(CandidateSet::TestOnly),
            _ => Err(Error::InvalidArgument(format!("unknown candidate set {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Ascending cutoffs for P@N, R@N and nDCG@N.
    pub cutoffs: Vec<usize>,
    pub candidates: CandidateSet,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![1, 5, 10],
            candidates: CandidateSet::All,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() || self.cutoffs[0] == 0 {
            return Err(Error::InvalidArgument("cutoffs must be non-empty and ≥ 1".into()));
        }
        if self.cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("cutoffs must be strictly ascending".into()));
        }
        Ok(())
    }
}

/// Ranked lists for every user with at least one positive test item.
pub fn ranked_lists(
    recommender: &dyn Recommender,
    dataset: &InteractionDataset,
    candidates: CandidateSet,
) -> Result<Vec<RankedList>> {
    if recommender.num_items() != dataset.num_items() {
        return Err(Error::LengthMismatch {
            left: recommender.num_items(),
            right: dataset.num_items(),
        });
    }
    let items = dataset.items();
    let mut scores = vec![0.0; items.len()];
    let mut lists = Vec::new();
    for u in 0..dataset.num_users() {
        let its = dataset.user_interactions(u);
        let relevant: BTreeSet<_> = its
            .iter()
            .filter(|it| it.positive && it.partition == Partition::Test)
            .map(|it| items[it.item])
            .collect();
        if relevant.is_empty() {
            continue;
        }
        recommender.score_user(u, &mut scores);
        let scored: Vec<_> = match candidates {
            CandidateSet::All => {
                let mut seen = vec![false; items.len()];
                for it in its.iter().filter(|it| it.partition.is_training()) {
                    seen[it.item] = true;
                }
                (0..items.len())
                    .filter(|&i| !seen[i])
                    .map(|i| (items[i], scores[i]))
                    .collect()
            }
            CandidateSet::TestOnly => its
                .iter()
                .filter(|it| it.partition == Partition::Test)
                .map(|it| (items[it.item], scores[it.item]))
                .collect(),
        };
        lists.push(RankedList::from_scores(dataset.users()[u], scored, &relevant)?);
    }
    Ok(lists)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub mean: f64,
    /// Aligned with [`MetricReport::users`].
    pub per_user: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub config_fingerprint: String,
    pub cutoffs: Vec<usize>,
    pub users: Vec<UserId>,
    /// `MRR`, `MAP`, then `nDCG@N`, `P@N`, `R@N` for each cutoff.
    pub metrics: Vec<MetricSeries>,
}

impl MetricReport {
    pub fn from_lists(model: &str, lists: &[RankedList], cutoffs: &[usize]) -> Result<Self> {
        if lists.is_empty() {
            return Err(Error::Degenerate("no test user has a relevant item".into()));
        }
        let mut metrics = Vec::new();
        let mut push = |name: String, f: &dyn Fn(&RankedList) -> Result<f64>| -> Result<()> {
            let per_user = lists.iter().map(f).collect::<Result<Vec<_>>>()?;
            let mean = per_user.iter().sum::<f64>() / per_user.len() as f64;
            metrics.push(MetricSeries {
                name,
                mean,
                per_user,
            });
            Ok(())
        };
        push("MRR".into(), &reciprocal_rank)?;
        push("MAP".into(), &average_precision)?;
        for &n in cutoffs {
            push(format!("nDCG@{n}"), &|l| ndcg_at_n(l, n))?;
            push(format!("P@{n}"), &|l| precision_at_n(l, n))?;
            push(format!("R@{n}"), &|l| recall_at_n(l, n))?;
        }
        Ok(Self {
            model: model.into(),
            config_fingerprint: String::new(),
            cutoffs: cutoffs.to_vec(),
            users: lists.iter().map(|l| l.user).collect(),
            metrics,
        })
    }

    pub fn series(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.series(name).map(|s| s.mean)
    }
}

pub fn evaluate(
    recommender: &dyn Recommender,
    dataset: &InteractionDataset,
    config: &EvalConfig,
    model: &str,
) -> Result<MetricReport> {
    config.validate()?;
    let lists = ranked_lists(recommender, dataset, config.candidates)?;
    MetricReport::from_lists(model, &lists, &config.cutoffs)
}

/// Fraction of `(user, positive, explicit negative)` triples within the
/// selected partitions whose positive scores strictly higher.
pub fn pairwise_auc(
    recommender: &dyn Recommender,
    dataset: &InteractionDataset,
    keep: impl Fn(Partition) -> bool,
) -> Result<f64> {
    let mut scores = vec![0.0; recommender.num_items()];
    let (mut wins, mut total) = (0u64, 0u64);
    for u in 0..dataset.num_users() {
        let pos = dataset.items_where(u, true, &keep);
        let neg = dataset.items_where(u, false, &keep);
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        recommender.score_user(u, &mut scores);
        for &p in &pos {
            for &n in &neg {
                total += 1;
                wins += u64::from(scores[p] > scores[n]);
            }
        }
    }
    if total == 0 {
        return Err(Error::Degenerate("no positive/negative pairs".into()));
    }
    Ok(wins as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ItemId;

    struct Fixed(Vec<Vec<f64>>);

    impl Recommender for Fixed {
        fn num_items(&self) -> usize {
            self.0[0].len()
        }
        fn score_user(&self, user: usize, scores: &mut [f64]) {
            scores.copy_from_slice(&self.0[user]);
        }
    }

    fn dataset() -> InteractionDataset {
        use Partition::*;
        let l = |u, i, p, part| (UserId(u), ItemId(i), p, part);
        InteractionDataset::from_partitioned(
            vec![
                l(0, 0, true, Train),
                l(0, 1, true, Test),
                l(0, 2, false, Test),
                l(1, 3, true, Train),
                l(1, 0, false, Test),
            ],
            [ItemId(4)],
        )
        .unwrap()
    }

    #[test]
    fn candidate_protocols() {
        let ds = dataset();
        let rec = Fixed(vec![vec![9.0, 1.0, 2.0, 3.0, 0.5], vec![0.0; 5]]);
        let all = ranked_lists(&rec, &ds, CandidateSet::All).unwrap();
        // user 1 has no positive test item
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].items, vec![ItemId(3), ItemId(2), ItemId(1), ItemId(4)]);
        let test = ranked_lists(&rec, &ds, CandidateSet::TestOnly).unwrap();
        assert_eq!(test[0].items, vec![ItemId(2), ItemId(1)]);
        let report = evaluate(&rec, &ds, &EvalConfig::default(), "fixed").unwrap();
        assert!((report.mean("MRR").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.mean("P@1").unwrap(), 0.0);
        assert_eq!(report.metrics.len(), 2 + 3 * 3);
    }

    #[test]
    fn auc_counts_strict_wins() {
        let ds = dataset();
        let rec = Fixed(vec![vec![1.0, 1.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0, 0.0]]);
        // user 0: (0 vs 2), (1 vs 2) win; user 1: (3 vs 0) tie
        assert!((pairwise_auc(&rec, &ds, |_| true).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_validation() {
        let bad = EvalConfig {
            cutoffs: vec![5, 1],
            candidates: CandidateSet::All,
        };
        assert!(bad.validate().is_err());
        assert!("test-only".parse::<CandidateSet>().is_ok());
        assert!("some".parse::<CandidateSet>().is_err());
    }
}
