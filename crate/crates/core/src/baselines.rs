//! PopRank, item-based kNN and BPR matrix factorization.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, ItemId, Partition};
use crate::error::{Error, Result};
use crate::eval::Recommender;
use crate::math;
use crate::rng;
use crate::training::{fit_pairwise, Hyperparams, PairwiseModel, TrainReport};

pub const DEFAULT_NEIGHBORS: usize = 80;

fn positive_training_items(dataset: &InteractionDataset, user: usize) -> Vec<usize> {
    dataset.items_where(user, true, Partition::is_training)
}

/// Positive training counts per dense item.
pub fn poprank_score(dataset: &InteractionDataset) -> Result<Vec<f64>> {
    if !dataset.interactions().iter().any(|it| it.partition.is_training()) {
        return Err(Error::Degenerate("training partition is empty".into()));
    }
    let mut counts = vec![0.0; dataset.num_items()];
    for it in dataset.interactions() {
        if it.positive && it.partition.is_training() {
            counts[it.item] += 1.0;
        }
    }
    Ok(counts)
}

/// The same popularity ranking for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct PopRank {
    pub scores: Vec<f64>,
}

impl PopRank {
    pub fn train(dataset: &InteractionDataset) -> Result<Self> {
        Ok(Self {
            scores: poprank_score(dataset)?,
        })
    }
}

impl Recommender for PopRank {
    fn num_items(&self) -> usize {
        self.scores.len()
    }

    fn score_user(&self, _user: usize, scores: &mut [f64]) {
        scores.copy_from_slice(&self.scores);
    }
}

/// Cosine similarities between binary positive-interaction item columns,
/// kept as per-item top-k neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSimilarityMatrix {
    k: usize,
    items: Vec<ItemId>,
    /// Sorted users with a positive training interaction, per item.
    columns: Vec<Vec<usize>>,
    /// Per item: up to `k` `(item, similarity)` pairs, descending similarity,
    /// ties by ascending item. Zero similarities and the item itself are left out.
    neighbors: Vec<Vec<(usize, f64)>>,
    /// `reverse[j]` lists `(i, sim)` for every `i` whose neighbor list holds `j`.
    reverse: Vec<Vec<(usize, f64)>>,
}

impl ItemSimilarityMatrix {
    pub fn build(dataset: &InteractionDataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let n = dataset.num_items();
        let mut columns = vec![Vec::new(); n];
        let mut co = vec![0u32; n * n];
        for u in 0..dataset.num_users() {
            let items = positive_training_items(dataset, u);
            for (a, &i) in items.iter().enumerate() {
                columns[i].push(u);
                for &j in &items[a + 1..] {
                    co[i * n + j] += 1;
                    co[j * n + i] += 1;
                }
            }
        }
        let sizes: Vec<f64> = columns.iter().map(|c| c.len() as f64).collect();
        let mut neighbors = Vec::with_capacity(n);
        let mut reverse = vec![Vec::new(); n];
        for i in 0..n {
            let mut row: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i && co[i * n + j] > 0)
                .map(|j| (j, f64::from(co[i * n + j]) / math::sqrt(sizes[i] * sizes[j])))
                .collect();
            row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            row.truncate(k);
            for &(j, s) in &row {
                reverse[j].push((i, s));
            }
            neighbors.push(row);
        }
        Ok(Self {
            k,
            items: dataset.items().to_vec(),
            columns,
            neighbors,
            reverse,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Full cosine similarity between two dense items (0 for the diagonal
    /// of an empty column).
    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        let (ca, cb) = (&self.columns[a], &self.columns[b]);
        if ca.is_empty() || cb.is_empty() {
            return 0.0;
        }
        let (mut x, mut y, mut common) = (0, 0, 0usize);
        while x < ca.len() && y < cb.len() {
            match ca[x].cmp(&cb[y]) {
                core::cmp::Ordering::Less => x += 1,
                core::cmp::Ordering::Greater => y += 1,
                core::cmp::Ordering::Equal => {
                    common += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        common as f64 / math::sqrt(ca.len() as f64 * cb.len() as f64)
    }

    pub fn neighbors(&self, item: usize) -> &[(usize, f64)] {
        &self.neighbors[item]
    }

    pub fn item_index(&self, item: ItemId) -> Option<usize> {
        self.items.binary_search(&item).ok()
    }
}

/// `Σ sim(item, j)` over the user's positive training items `j` within the
/// item's top-k neighbor list. Unknown items score 0.
pub fn knn_item_score(
    dataset: &InteractionDataset,
    sim: &ItemSimilarityMatrix,
    user: usize,
    item: ItemId,
) -> f64 {
    let Some(i) = sim.item_index(item) else {
        return 0.0;
    };
    let pos = positive_training_items(dataset, user);
    sim.neighbors(i)
        .iter()
        .filter(|(j, _)| pos.contains(j))
        .map(|&(_, s)| s)
        .sum()
}

#[derive(Debug, Clone)]
pub struct KnnItem {
    pub sim: ItemSimilarityMatrix,
    user_positives: Vec<Vec<usize>>,
}

impl KnnItem {
    pub fn train(dataset: &InteractionDataset, k: usize) -> Result<Self> {
        Ok(Self {
            sim: ItemSimilarityMatrix::build(dataset, k)?,
            user_positives: (0..dataset.num_users())
                .map(|u| positive_training_items(dataset, u))
                .collect(),
        })
    }
}

impl Recommender for KnnItem {
    fn num_items(&self) -> usize {
        self.sim.neighbors.len()
    }

    fn score_user(&self, user: usize, scores: &mut [f64]) {
        scores.fill(0.0);
        for &j in &self.user_positives[user] {
            for &(i, s) in &self.sim.reverse[j] {
                scores[i] += s;
            }
        }
    }
}

/// Latent user and item factors plus an item bias: `score = ⟨p_u, q_i⟩ + b_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfModel {
    num_factors: usize,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    item_bias: Vec<f64>,
}

impl MfModel {
    /// Normal(0, stddev) factors drawn from the init stream; zero biases.
    pub fn init(
        num_users: usize,
        num_items: usize,
        num_factors: usize,
        stddev: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_factors == 0 {
            return Err(Error::InvalidArgument("num_factors must be positive".into()));
        }
        if !(stddev > 0.0 && stddev.is_finite()) {
            return Err(Error::InvalidArgument("init stddev must be positive and finite".into()));
        }
        let normal = Normal::new(0.0, stddev)
            .map_err(|_| Error::InvalidArgument("init stddev must be positive and finite".into()))?;
        let mut rng = rng::stream(seed, rng::STREAM_INIT);
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| normal.sample(&mut rng)).collect() };
        let user_factors = draw(num_users * num_factors);
        let item_factors = draw(num_items * num_factors);
        Ok(Self {
            num_factors,
            user_factors,
            item_factors,
            item_bias: vec![0.0; num_items],
        })
    }

    pub fn num_factors(&self) -> usize {
        self.num_factors
    }

    pub fn num_users(&self) -> usize {
        self.user_factors.len() / self.num_factors
    }

    pub fn user_factor(&self, user: usize) -> &[f64] {
        let m = self.num_factors;
        &self.user_factors[user * m..(user + 1) * m]
    }

    pub fn item_factor(&self, item: usize) -> &[f64] {
        let m = self.num_factors;
        &self.item_factors[item * m..(item + 1) * m]
    }

    pub fn item_bias(&self) -> &[f64] {
        &self.item_bias
    }

    /// Checks dimensions against a dataset shape, e.g. after deserializing.
    pub fn check_shape(&self, num_users: usize, num_items: usize) -> Result<()> {
        let m = self.num_factors;
        if m == 0
            || self.user_factors.len() != num_users * m
            || self.item_factors.len() != num_items * m
            || self.item_bias.len() != num_items
        {
            return Err(Error::InvalidArgument("factor matrices do not match the dataset".into()));
        }
        if !self.is_finite() {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.user_factors
            .iter()
            .chain(&self.item_factors)
            .chain(&self.item_bias)
            .all(|v| v.is_finite())
    }
}

impl PairwiseModel for MfModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        let dot: f64 = self
            .user_factor(user)
            .iter()
            .zip(self.item_factor(item))
            .map(|(a, b)| a * b)
            .sum();
        dot + self.item_bias[item]
    }

    fn pair_step(&mut self, user: usize, pos: usize, neg: usize, hp: &Hyperparams) -> f64 {
        let (lr, l2, m) = (hp.learning_rate, hp.l2_reg, self.num_factors);
        let margin = self.score(user, pos) - self.score(user, neg);
        let loss = math::softplus(-margin);
        let g = -math::sigmoid(-margin);
        for f in 0..m {
            let p = self.user_factors[user * m + f];
            let qp = self.item_factors[pos * m + f];
            let qn = self.item_factors[neg * m + f];
            self.user_factors[user * m + f] = p - lr * (g * (qp - qn) + l2 * p);
            self.item_factors[pos * m + f] = qp - lr * (g * p + l2 * qp);
            self.item_factors[neg * m + f] = qn - lr * (-g * p + l2 * qn);
        }
        let bp = self.item_bias[pos];
        let bn = self.item_bias[neg];
        self.item_bias[pos] = bp - lr * (g + l2 * bp);
        self.item_bias[neg] = bn - lr * (-g + l2 * bn);
        loss
    }
}

impl Recommender for MfModel {
    fn num_items(&self) -> usize {
        self.item_bias.len()
    }

    fn score_user(&self, user: usize, scores: &mut [f64]) {
        for (i, s) in scores.iter_mut().enumerate() {
            *s = self.score(user, i);
        }
    }
}

/// BPRMF under the shared early-stopping contract; `hp.negatives` selects the
/// negative regime (see [`Hyperparams::bprmf`]).
pub fn bprmf_train(dataset: &InteractionDataset, hp: &Hyperparams) -> Result<(MfModel, TrainReport)> {
    hp.validate()?;
    let template = MfModel::init(
        dataset.num_users(),
        dataset.num_items(),
        hp.num_factors,
        hp.init_stddev,
        hp.seed,
    )?;
    fit_pairwise(dataset, hp, || Ok(template.clone()), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::UserId;
    use crate::eval::pairwise_auc;

    fn toy(labels: &[(u32, u32, bool)]) -> InteractionDataset {
        InteractionDataset::from_labels(
            labels.iter().map(|&(u, i, p)| (UserId(u), ItemId(i), p)),
            [],
        )
        .unwrap()
    }

    #[test]
    fn popularity_counts() {
        use Partition::*;
        let mut labels = Vec::new();
        for u in 0..5 {
            labels.push((UserId(u), ItemId(0), true, Train));
        }
        for u in 0..2 {
            labels.push((UserId(u), ItemId(1), true, Train));
        }
        labels.push((UserId(0), ItemId(2), false, Train));
        labels.push((UserId(1), ItemId(3), true, Test));
        let ds = InteractionDataset::from_partitioned(labels, []).unwrap();
        assert_eq!(poprank_score(&ds).unwrap(), vec![5.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_columns_have_unit_similarity() {
        let ds = toy(&[(0, 0, true), (0, 1, true), (1, 0, true), (1, 1, true), (2, 2, true)]);
        let sim = ItemSimilarityMatrix::build(&ds, 80).unwrap();
        assert!((sim.similarity(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(sim.neighbors(0), &[(1, 1.0)]);
        assert!(sim.neighbors(2).is_empty());
    }

    #[test]
    fn hand_computed_knn_scores() {
        // columns: a = {u0,u1}, b = {u0}, c = {u1,u2}
        let ds = toy(&[(0, 0, true), (0, 1, true), (1, 0, true), (1, 2, true), (2, 2, true)]);
        let sim = ItemSimilarityMatrix::build(&ds, 80).unwrap();
        let inv_sqrt2 = 1.0 / math::sqrt(2.0);
        assert!((sim.similarity(0, 1) - inv_sqrt2).abs() < 1e-15);
        assert!((sim.similarity(0, 2) - 0.5).abs() < 1e-15);
        assert_eq!(sim.similarity(1, 2), 0.0);
        // user 2 likes only c: score(a) = sim(a, c)
        assert!((knn_item_score(&ds, &sim, 2, ItemId(0)) - 0.5).abs() < 1e-15);
        assert_eq!(knn_item_score(&ds, &sim, 2, ItemId(1)), 0.0);
        assert_eq!(knn_item_score(&ds, &sim, 2, ItemId(9)), 0.0);
        let knn = KnnItem::train(&ds, 80).unwrap();
        let mut scores = vec![0.0; 3];
        knn.score_user(0, &mut scores);
        assert!((scores[2] - 0.5).abs() < 1e-15);
        assert!((scores[0] - inv_sqrt2).abs() < 1e-15);
        // k = 1 keeps only a's best neighbor b
        let top1 = ItemSimilarityMatrix::build(&ds, 1).unwrap();
        assert_eq!(knn_item_score(&ds, &top1, 2, ItemId(0)), 0.0);
    }

    #[test]
    fn user_without_positives_scores_zero() {
        let ds = toy(&[(0, 0, true), (0, 1, true), (1, 0, false)]);
        let knn = KnnItem::train(&ds, 80).unwrap();
        let mut scores = vec![1.0; 2];
        knn.score_user(1, &mut scores);
        assert_eq!(scores, vec![0.0, 0.0]);
    }

    fn separable() -> InteractionDataset {
        // even users like even items, odd users like odd items
        let mut labels = Vec::new();
        for u in 0..20u32 {
            for i in 0..10u32 {
                labels.push((u, i, u % 2 == i % 2));
            }
        }
        toy(&labels)
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let ds = separable();
        let hp = Hyperparams {
            num_factors: 4,
            learning_rate: 0.0,
            max_epochs: 3,
            early_stopping: false,
            ..Hyperparams::bprmf()
        };
        let (model, _) = bprmf_train(&ds, &hp).unwrap();
        assert_eq!(model, MfModel::init(20, 10, 4, hp.init_stddev, hp.seed).unwrap());
    }

    #[test]
    fn separable_data_is_learned() {
        let ds = separable();
        let hp = Hyperparams {
            num_factors: 8,
            learning_rate: 0.1,
            init_stddev: 0.1,
            max_epochs: 60,
            early_stopping: false,
            ..Hyperparams::bprmf()
        };
        let (model, _) = bprmf_train(&ds, &hp).unwrap();
        assert!(model.is_finite());
        let auc = pairwise_auc(&model, &ds, Partition::is_training).unwrap();
        assert!(auc > 0.95, "auc = {auc}");
        let (again, _) = bprmf_train(&ds, &hp).unwrap();
        assert_eq!(model, again);
    }
}
