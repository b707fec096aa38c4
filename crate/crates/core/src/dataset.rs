//! Rating records, binarized interaction datasets and the train/test split.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct UserId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One explicit rating as it appears in the source file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user: UserId,
    pub item: ItemId,
    pub rating: f64,
    pub timestamp: i64,
}

/// Ratings strictly above this are positive feedback.
pub const POSITIVE_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    /// Train and validation together form the training side of the outer split.
    pub fn is_training(self) -> bool {
        matches!(self, Partition::Train | Partition::Validation)
    }
}

/// A binarized interaction addressed by dense user/item positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub positive: bool,
    pub partition: Partition,
}

/// Users, items and labeled binary feedback with a partition label per pair.
///
/// Users and items are kept sorted by id, and interactions sorted by
/// `(user, item)`, so dense positions are stable for identical input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionDataset {
    users: Vec<UserId>,
    items: Vec<ItemId>,
    interactions: Vec<Interaction>,
    user_offsets: Vec<usize>,
}

impl InteractionDataset {
    /// Builds a dataset with every interaction in the train partition.
    ///
    /// `catalog` lists extra items that exist without any interaction.
    pub fn from_labels(
        labels: impl IntoIterator<Item = (UserId, ItemId, bool)>,
        catalog: impl IntoIterator<Item = ItemId>,
    ) -> Result<Self> {
        let labels: Vec<_> = labels
            .into_iter()
            .map(|(u, i, p)| (u, i, p, Partition::Train))
            .collect();
        Self::from_partitioned(labels, catalog)
    }

    pub fn from_partitioned(
        labels: impl IntoIterator<Item = (UserId, ItemId, bool, Partition)>,
        catalog: impl IntoIterator<Item = ItemId>,
    ) -> Result<Self> {
        let mut by_pair: BTreeMap<(UserId, ItemId), (bool, Partition)> = BTreeMap::new();
        let mut items: BTreeSet<ItemId> = catalog.into_iter().collect();
        for (user, item, positive, partition) in labels {
            if by_pair.insert((user, item), (positive, partition)).is_some() {
                return Err(Error::DuplicateInteraction { user, item });
            }
            items.insert(item);
        }
        let users: Vec<UserId> = by_pair
            .keys()
            .map(|&(u, _)| u)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let items: Vec<ItemId> = items.into_iter().collect();

        let mut interactions = Vec::with_capacity(by_pair.len());
        let mut user_offsets = Vec::with_capacity(users.len() + 1);
        let mut user_pos = 0usize;
        user_offsets.push(0);
        for (&(user, item), &(positive, partition)) in &by_pair {
            while users[user_pos] != user {
                user_pos += 1;
                user_offsets.push(interactions.len());
            }
            let item = items.binary_search(&item).expect("item registered above");
            interactions.push(Interaction {
                user: user_pos,
                item,
                positive,
                partition,
            });
        }
        while user_offsets.len() <= users.len() {
            user_offsets.push(interactions.len());
        }
        Ok(Self {
            users,
            items,
            interactions,
            user_offsets,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn user_index(&self, user: UserId) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub fn item_index(&self, item: ItemId) -> Option<usize> {
        self.items.binary_search(&item).ok()
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn user_interactions(&self, user: usize) -> &[Interaction] {
        &self.interactions[self.user_offsets[user]..self.user_offsets[user + 1]]
    }

    /// Dense items of `user` with the given polarity whose partition passes `keep`.
    pub fn items_where(
        &self,
        user: usize,
        positive: bool,
        keep: impl Fn(Partition) -> bool,
    ) -> Vec<usize> {
        self.user_interactions(user)
            .iter()
            .filter(|it| it.positive == positive && keep(it.partition))
            .map(|it| it.item)
            .collect()
    }

    /// Returns a copy with partitions rewritten by `f(interaction)`.
    pub fn relabeled(&self, mut f: impl FnMut(&Interaction) -> Partition) -> Self {
        let mut out = self.clone();
        for it in &mut out.interactions {
            it.partition = f(it);
        }
        out
    }

    pub fn count_partition(&self, partition: Partition) -> usize {
        self.interactions
            .iter()
            .filter(|it| it.partition == partition)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub avg_ratings_per_user: f64,
    /// Fraction of empty user-item cells, in `[0, 1]`.
    pub sparsity: f64,
    /// Share of positive ratings, in `[0, 100]`.
    pub positive_percentage: f64,
}

impl DatasetStats {
    pub fn from_counts(users: usize, items: usize, ratings: usize, positives: usize) -> Self {
        let cells = users as f64 * items as f64;
        Self {
            users,
            items,
            ratings,
            avg_ratings_per_user: if users == 0 {
                0.0
            } else {
                ratings as f64 / users as f64
            },
            sparsity: if cells == 0.0 {
                1.0
            } else {
                1.0 - ratings as f64 / cells
            },
            positive_percentage: if ratings == 0 {
                0.0
            } else {
                100.0 * positives as f64 / ratings as f64
            },
        }
    }
}

/// Keeps ratings of mapped items and labels `rating > 3` as positive.
pub fn binarize_and_stats(
    records: &[RatingRecord],
    mapped_items: &BTreeSet<ItemId>,
) -> Result<(InteractionDataset, DatasetStats)> {
    if mapped_items.is_empty() {
        return Err(Error::Degenerate("item mapping is empty".into()));
    }
    let kept: Vec<_> = records
        .iter()
        .filter(|r| mapped_items.contains(&r.item))
        .map(|r| (r.user, r.item, r.rating > POSITIVE_THRESHOLD))
        .collect();
    if kept.is_empty() {
        return Err(Error::Degenerate(
            "no ratings left after restricting to mapped items".into(),
        ));
    }
    let positives = kept.iter().filter(|(_, _, p)| *p).count();
    let dataset = InteractionDataset::from_labels(kept, core::iter::empty())?;
    let stats = DatasetStats::from_counts(
        dataset.num_users(),
        dataset.num_items(),
        dataset.interactions().len(),
        positives,
    );
    Ok((dataset, stats))
}

pub const TEST_FRACTION: f64 = 0.2;
/// Users with fewer interactions than this keep everything in train.
pub const MIN_INTERACTIONS_FOR_TEST: usize = 5;

/// Per-user stratified 80/20 split.
pub fn split_train_test(dataset: &InteractionDataset, seed: u64) -> InteractionDataset {
    split_train_test_with(dataset, TEST_FRACTION, MIN_INTERACTIONS_FOR_TEST, seed)
        .expect("default split parameters are valid")
}

pub fn split_train_test_with(
    dataset: &InteractionDataset,
    test_fraction: f64,
    min_interactions: usize,
    seed: u64,
) -> Result<InteractionDataset> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SPLIT);
    let mut labels = alloc::vec![Partition::Train; dataset.interactions().len()];
    for user in 0..dataset.num_users() {
        let start = dataset.user_offsets[user];
        let n = dataset.user_offsets[user + 1] - start;
        if n < min_interactions.max(1) {
            continue;
        }
        let n_test = math::round(test_fraction * n as f64) as usize;
        let mut order: Vec<usize> = (start..start + n).collect();
        order.shuffle(&mut rng);
        for &pos in &order[..n_test.min(n)] {
            labels[pos] = Partition::Test;
        }
    }
    let mut pos = 0;
    Ok(dataset.relabeled(|_| {
        let label = labels[pos];
        pos += 1;
        label
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(u: u32, i: u32, r: f64) -> RatingRecord {
        RatingRecord {
            user: UserId(u),
            item: ItemId(i),
            rating: r,
            timestamp: 0,
        }
    }

    #[test]
    fn rating_of_three_is_negative() {
        let mapped: BTreeSet<_> = [ItemId(1)].into_iter().collect();
        let (ds, stats) = binarize_and_stats(&[rec(1, 1, 3.0)], &mapped).unwrap();
        assert!(!ds.interactions()[0].positive);
        assert_eq!(stats.positive_percentage, 0.0);
    }

    #[test]
    fn unmapped_items_are_dropped() {
        let mapped: BTreeSet<_> = [ItemId(1)].into_iter().collect();
        let (ds, stats) =
            binarize_and_stats(&[rec(1, 1, 5.0), rec(1, 2, 5.0), rec(2, 2, 1.0)], &mapped)
                .unwrap();
        assert_eq!(ds.num_users(), 1);
        assert_eq!(ds.num_items(), 1);
        assert_eq!(stats.ratings, 1);
        assert!(binarize_and_stats(&[rec(1, 2, 5.0)], &mapped).is_err());
        assert!(binarize_and_stats(&[rec(1, 1, 5.0)], &BTreeSet::new()).is_err());
    }

    #[test]
    fn stats_identities() {
        let s = DatasetStats::from_counts(3_997, 3_082, 695_842, 389_672);
        let expected = 1.0 - 695_842.0 / (3_997.0 * 3_082.0);
        assert!((s.sparsity - expected).abs() < 1e-10);
        assert!((s.sparsity * 100.0 - 94.35).abs() < 0.01);
    }

    #[test]
    fn duplicate_pair_rejected() {
        let labels = vec![(UserId(1), ItemId(1), true), (UserId(1), ItemId(1), false)];
        assert!(matches!(
            InteractionDataset::from_labels(labels, []),
            Err(Error::DuplicateInteraction { .. })
        ));
    }

    #[test]
    fn split_exact_proportion_and_determinism() {
        let labels = (0..100).map(|i| (UserId(7), ItemId(i), i % 2 == 0));
        let ds = InteractionDataset::from_labels(labels, []).unwrap();
        let a = split_train_test(&ds, 11);
        let b = split_train_test(&ds, 11);
        assert_eq!(a, b);
        assert_eq!(a.count_partition(Partition::Test), 20);
        assert_eq!(a.count_partition(Partition::Train), 80);
        let c = split_train_test(&ds, 12);
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_users_stay_in_train() {
        let labels = vec![(UserId(1), ItemId(1), true)];
        let ds = InteractionDataset::from_labels(labels, []).unwrap();
        let split = split_train_test(&ds, 0);
        assert_eq!(split.interactions()[0].partition, Partition::Train);
    }

    #[test]
    fn dense_layout() {
        let labels = vec![
            (UserId(9), ItemId(3), true),
            (UserId(2), ItemId(5), false),
            (UserId(9), ItemId(1), false),
        ];
        let ds = InteractionDataset::from_labels(labels, [ItemId(100)]).unwrap();
        assert_eq!(ds.users(), &[UserId(2), UserId(9)]);
        assert_eq!(ds.items(), &[ItemId(1), ItemId(3), ItemId(5), ItemId(100)]);
        assert_eq!(ds.user_interactions(0).len(), 1);
        assert_eq!(ds.user_interactions(1).len(), 2);
        assert_eq!(ds.items_where(1, true, |_| true), vec![1]);
    }
}
