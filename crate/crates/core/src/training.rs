//! Pairwise BPR training with SGD and the early-stopping/retrain procedure.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, ItemId, Partition};
use crate::error::{Error, Result};
use crate::eval::Recommender;
use crate::features::{item_features, FeatureIndex};
use crate::fm::FmModel;
use crate::knowledge::ItemKnowledge;
use crate::math;
use crate::rng;
use crate::sparse::SparseVector;

/// How training pairs are drawn from `C_u+ × C_u−` in each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStrategy {
    /// One uniformly drawn negative per `(user, positive)`.
    Sampled,
    /// Every positive/negative combination of each user.
    Full,
}

/// Where negatives come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeRegime {
    /// The user's explicitly disliked items (rating ≤ 3).
    Explicit,
    /// Any item the user has not rated positively.
    Unseen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Latent dimensionality `m`.
    pub num_factors: usize,
    pub learning_rate: f64,
    /// L2 strength on touched linear and factor weights; never the global bias.
    pub l2_reg: f64,
    pub init_stddev: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub pair_strategy: PairStrategy,
    pub negatives: NegativeRegime,
    /// Share of each user's training interactions held out for early stopping.
    pub validation_fraction: f64,
    pub early_stopping: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            num_factors: 200,
            learning_rate: 0.05,
            l2_reg: 1e-4,
            init_stddev: 0.01,
            max_epochs: 100,
            seed: 42,
            pair_strategy: PairStrategy::Sampled,
            negatives: NegativeRegime::Explicit,
            validation_fraction: 0.1,
            early_stopping: true,
        }
    }
}

impl Hyperparams {
    /// Defaults for the matrix-factorization baseline: unseen-item negatives.
    pub fn bprmf() -> Self {
        Self {
            negatives: NegativeRegime::Unseen,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.num_factors == 0 {
            return bad("num_factors must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return bad("l2_reg must be finite and non-negative");
        }
        if !(self.init_stddev > 0.0 && self.init_stddev.is_finite()) {
            return bad("init_stddev must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// `−ln σ(y_pos − y_neg)`, computed as `softplus(y_neg − y_pos)`.
pub fn bpr_pair_loss(y_pos: f64, y_neg: f64) -> f64 {
    math::softplus(y_neg - y_pos)
}

/// One SGD step on the regularized BPR loss of a single pair, in place.
///
/// Only parameters of features present in `x_pos` or `x_neg` move; the
/// global bias has zero margin gradient and is not regularized. Returns the
/// pair loss before the update.
pub fn sgd_pair_step(
    model: &mut FmModel,
    x_pos: &SparseVector,
    x_neg: &SparseVector,
    hp: &Hyperparams,
) -> Result<f64> {
    model.check(x_pos)?;
    model.check(x_neg)?;
    Ok(sgd_pair_step_unchecked(model, x_pos, x_neg, hp.learning_rate, hp.l2_reg))
}

fn sgd_pair_step_unchecked(
    model: &mut FmModel,
    x_pos: &SparseVector,
    x_neg: &SparseVector,
    lr: f64,
    l2: f64,
) -> f64 {
    let m = model.num_factors();
    let mut q_pos = vec![0.0; m];
    let mut q_neg = vec![0.0; m];
    model.factor_sums(x_pos, &mut q_pos);
    model.factor_sums(x_neg, &mut q_neg);
    let margin = model.predict_unchecked(x_pos) - model.predict_unchecked(x_neg);
    let loss = math::softplus(-margin);
    // d loss / d margin
    let g = -math::sigmoid(-margin);

    let (pos, neg) = (x_pos.entries(), x_neg.entries());
    let (mut a, mut b) = (0, 0);
    while a < pos.len() || b < neg.len() {
        let ia = pos.get(a).map_or(usize::MAX, |e| e.0);
        let ib = neg.get(b).map_or(usize::MAX, |e| e.0);
        let i = ia.min(ib);
        let xp = if ia == i {
            a += 1;
            pos[a - 1].1
        } else {
            0.0
        };
        let xn = if ib == i {
            b += 1;
            neg[b - 1].1
        } else {
            0.0
        };
        let w = &mut model.linear_mut()[i];
        *w -= lr * (g * (xp - xn) + l2 * *w);
        let row = model.factor_mut(i);
        for f in 0..m {
            let v = row[f];
            let dv = xp * (q_pos[f] - v * xp) - xn * (q_neg[f] - v * xn);
            row[f] = v - lr * (g * dv + l2 * v);
        }
    }
    loss
}

/// A model trainable on `(user, positive item, negative item)` triples
/// addressed by dense dataset positions.
pub trait PairwiseModel {
    fn score(&self, user: usize, item: usize) -> f64;

    /// Applies one SGD step and returns the pre-update pair loss.
    fn pair_step(&mut self, user: usize, pos: usize, neg: usize, hp: &Hyperparams) -> f64;
}

/// An FM bound to a dataset: user one-hot positions plus precomputed item rows.
#[derive(Debug, Clone)]
pub struct FmRanker {
    pub model: FmModel,
    user_features: Vec<usize>,
    item_rows: Vec<SparseVector>,
}

impl FmRanker {
    /// Checks that every dataset user and item is indexed and fits the model.
    pub fn new(
        model: FmModel,
        dataset: &InteractionDataset,
        index: &FeatureIndex,
        knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    ) -> Result<Self> {
        if model.num_features() != index.dim() {
            return Err(Error::LengthMismatch {
                left: model.num_features(),
                right: index.dim(),
            });
        }
        let user_features = dataset
            .users()
            .iter()
            .map(|&u| index.user_feature(u).ok_or(Error::UnknownUser(u)))
            .collect::<Result<Vec<_>>>()?;
        let empty = ItemKnowledge::empty();
        let item_rows = dataset
            .items()
            .iter()
            .map(|&i| item_features(i, index, knowledge.get(&i).unwrap_or(&empty)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&u) = user_features.iter().find(|&&u| {
            item_rows
                .iter()
                .any(|row| row.entries().first().is_some_and(|&(first, _)| first <= u))
        }) {
            return Err(Error::InvalidArgument(format!(
                "user feature {u} does not precede the item block"
            )));
        }
        Ok(Self {
            model,
            user_features,
            item_rows,
        })
    }

    pub fn example(&self, user: usize, item: usize) -> SparseVector {
        let mut x = SparseVector::new();
        x.push_sorted(self.user_features[user], 1.0);
        x.concat(&self.item_rows[item])
            .expect("user block precedes item rows")
    }

    pub fn item_row(&self, item: usize) -> &SparseVector {
        &self.item_rows[item]
    }

    pub fn user_feature(&self, user: usize) -> usize {
        self.user_features[user]
    }

    pub fn into_model(self) -> FmModel {
        self.model
    }
}

impl PairwiseModel for FmRanker {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.model.predict_unchecked(&self.example(user, item))
    }

    fn pair_step(&mut self, user: usize, pos: usize, neg: usize, hp: &Hyperparams) -> f64 {
        let x_pos = self.example(user, pos);
        let x_neg = self.example(user, neg);
        sgd_pair_step_unchecked(&mut self.model, &x_pos, &x_neg, hp.learning_rate, hp.l2_reg)
    }
}

/// Ranks all items for a user in `O(m)` per item.
///
/// For `x = e_u + row_i` the prediction splits into
/// `w0 + w_u + c_i + ⟨v_u, q_i⟩`, where `q_i = Σ_j v_j x_j` and `c_i` holds
/// the item row's linear and internal pairwise terms.
#[derive(Debug, Clone)]
pub struct FmScorer<'a> {
    ranker: &'a FmRanker,
    item_bias: Vec<f64>,
    item_sums: Vec<f64>,
}

impl FmRanker {
    pub fn scorer(&self) -> FmScorer<'_> {
        let m = self.model.num_factors();
        let mut item_bias = Vec::with_capacity(self.item_rows.len());
        let mut item_sums = vec![0.0; self.item_rows.len() * m];
        for (row, q) in self.item_rows.iter().zip(item_sums.chunks_mut(m)) {
            self.model.factor_sums(row, q);
            let linear: f64 = row.iter().map(|(j, x)| self.model.linear()[j] * x).sum();
            let mut squares = 0.0;
            for (j, x) in row.iter() {
                squares += self.model.factor(j).iter().map(|v| v * v * x * x).sum::<f64>();
            }
            let sum_sq: f64 = q.iter().map(|v| v * v).sum();
            item_bias.push(linear + 0.5 * (sum_sq - squares));
        }
        FmScorer {
            ranker: self,
            item_bias,
            item_sums,
        }
    }
}

impl Recommender for FmScorer<'_> {
    fn num_items(&self) -> usize {
        self.item_bias.len()
    }

    fn score_user(&self, user: usize, scores: &mut [f64]) {
        let model = &self.ranker.model;
        let m = model.num_factors();
        let u = self.ranker.user_features[user];
        let base = model.bias() + model.linear()[u];
        let vu = model.factor(u);
        for ((s, &c), q) in scores.iter_mut().zip(&self.item_bias).zip(self.item_sums.chunks(m)) {
            *s = base + c + vu.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Per-user positives and negatives of the partitions selected at construction.
#[derive(Debug, Clone)]
pub struct PairSampler {
    regime: NegativeRegime,
    num_items: usize,
    positives: Vec<Vec<usize>>,
    /// Explicit negatives, or the positive mask under [`NegativeRegime::Unseen`].
    negatives: Vec<Vec<usize>>,
    positive_mask: Vec<Vec<bool>>,
}

impl PairSampler {
    pub fn new(
        dataset: &InteractionDataset,
        keep: impl Fn(Partition) -> bool,
        regime: NegativeRegime,
    ) -> Self {
        let n_users = dataset.num_users();
        let num_items = dataset.num_items();
        let mut positives = Vec::with_capacity(n_users);
        let mut negatives = Vec::with_capacity(n_users);
        let mut positive_mask = Vec::new();
        for u in 0..n_users {
            let pos = dataset.items_where(u, true, &keep);
            match regime {
                NegativeRegime::Explicit => negatives.push(dataset.items_where(u, false, &keep)),
                NegativeRegime::Unseen => {
                    let mut mask = vec![false; num_items];
                    for &i in &pos {
                        mask[i] = true;
                    }
                    negatives.push(Vec::new());
                    positive_mask.push(mask);
                }
            }
            positives.push(pos);
        }
        Self {
            regime,
            num_items,
            positives,
            negatives,
            positive_mask,
        }
    }

    fn negative_count(&self, user: usize) -> usize {
        match self.regime {
            NegativeRegime::Explicit => self.negatives[user].len(),
            NegativeRegime::Unseen => self.num_items - self.positives[user].len(),
        }
    }

    /// Uniform draw from the user's negatives; `None` if the user has none.
    pub fn sample_negative(&self, user: usize, rng: &mut impl RngCore) -> Option<usize> {
        if self.negative_count(user) == 0 {
            return None;
        }
        Some(match self.regime {
            NegativeRegime::Explicit => {
                let negs = &self.negatives[user];
                negs[rng.random_range(0..negs.len())]
            }
            NegativeRegime::Unseen => loop {
                let i = rng.random_range(0..self.num_items);
                if !self.positive_mask[user][i] {
                    break i;
                }
            },
        })
    }

    fn negatives_of(&self, user: usize) -> Box<dyn Iterator<Item = usize> + '_> {
        match self.regime {
            NegativeRegime::Explicit => Box::new(self.negatives[user].iter().copied()),
            NegativeRegime::Unseen => Box::new(
                (0..self.num_items).filter(move |&i| !self.positive_mask[user][i]),
            ),
        }
    }

    /// `(user, positive)` anchors of users that have at least one negative.
    pub fn anchors(&self) -> Vec<(usize, usize)> {
        (0..self.positives.len())
            .filter(|&u| self.negative_count(u) > 0)
            .flat_map(|u| self.positives[u].iter().map(move |&i| (u, i)))
            .collect()
    }

    pub fn all_pairs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.positives.len() {
            for &p in &self.positives[u] {
                out.extend(self.negatives_of(u).map(|n| (u, p, n)));
            }
        }
        out
    }

    pub fn positives(&self, user: usize) -> &[usize] {
        &self.positives[user]
    }
}

/// One pass over the training pairs in shuffled order. Returns the mean
/// pre-update pair loss.
pub fn epoch<M: PairwiseModel>(
    model: &mut M,
    sampler: &PairSampler,
    hp: &Hyperparams,
    rng: &mut rng::Rng,
) -> Result<f64> {
    let mut total = 0.0;
    let count;
    match hp.pair_strategy {
        PairStrategy::Sampled => {
            let mut anchors = sampler.anchors();
            if anchors.is_empty() {
                return Err(Error::Degenerate("no user has both a positive and a negative".into()));
            }
            anchors.shuffle(rng);
            for &(u, pos) in &anchors {
                let neg = sampler.sample_negative(u, rng).expect("anchor users have negatives");
                total += model.pair_step(u, pos, neg, hp);
            }
            count = anchors.len();
        }
        PairStrategy::Full => {
            let mut pairs = sampler.all_pairs();
            if pairs.is_empty() {
                return Err(Error::Degenerate("no user has both a positive and a negative".into()));
            }
            pairs.shuffle(rng);
            for &(u, pos, neg) in &pairs {
                total += model.pair_step(u, pos, neg, hp);
            }
            count = pairs.len();
        }
    }
    Ok(total / count as f64)
}

/// Mean BPR loss of `model` over fixed triples.
pub fn mean_pair_loss<M: PairwiseModel>(model: &M, pairs: &[(usize, usize, usize)]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|&(u, p, n)| bpr_pair_loss(model.score(u, p), model.score(u, n)))
        .sum();
    total / pairs.len() as f64
}

/// Moves `round(fraction · n)` (at least one) of each user's training
/// interactions into [`Partition::Validation`]. Users with fewer than two
/// training interactions keep them all.
pub fn inner_validation_split(
    dataset: &InteractionDataset,
    fraction: f64,
    seed: u64,
) -> InteractionDataset {
    let mut rng = rng::stream(seed, rng::STREAM_VALIDATION);
    let mut held_out = vec![false; dataset.interactions().len()];
    let mut offset = 0;
    for user in 0..dataset.num_users() {
        let its = dataset.user_interactions(user);
        let train: Vec<usize> = (0..its.len())
            .filter(|&k| its[k].partition.is_training())
            .map(|k| offset + k)
            .collect();
        offset += its.len();
        let n = train.len();
        if n < 2 || fraction <= 0.0 {
            continue;
        }
        let k = (math::round(fraction * n as f64) as usize).clamp(1, n - 1);
        let chosen: Vec<usize> = train.choose_multiple(&mut rng, k).copied().collect();
        for c in chosen {
            held_out[c] = true;
        }
    }
    let mut pos = 0;
    dataset.relabeled(|it| {
        let label = if held_out[pos] {
            Partition::Validation
        } else if it.partition.is_training() {
            Partition::Train
        } else {
            it.partition
        };
        pos += 1;
        label
    })
}

/// Fixed validation triples. Explicit: every held-out positive with every
/// held-out negative of the same user. Unseen: each held-out positive with
/// ten items the user never rated positively, drawn once from the seed.
pub fn validation_pairs(
    dataset: &InteractionDataset,
    regime: NegativeRegime,
    seed: u64,
) -> Vec<(usize, usize, usize)> {
    const UNSEEN_PER_POSITIVE: usize = 10;
    let mut out = Vec::new();
    match regime {
        NegativeRegime::Explicit => {
            for u in 0..dataset.num_users() {
                let pos = dataset.items_where(u, true, |p| p == Partition::Validation);
                let neg = dataset.items_where(u, false, |p| p == Partition::Validation);
                for &p in &pos {
                    out.extend(neg.iter().map(|&n| (u, p, n)));
                }
            }
        }
        NegativeRegime::Unseen => {
            let sampler = PairSampler::new(dataset, Partition::is_training, NegativeRegime::Unseen);
            let mut rng = rng::stream(seed, rng::STREAM_VALIDATION_NEGATIVES);
            for u in 0..dataset.num_users() {
                for p in dataset.items_where(u, true, |p| p == Partition::Validation) {
                    for _ in 0..UNSEEN_PER_POSITIVE {
                        if let Some(n) = sampler.sample_negative(u, &mut rng) {
                            out.push((u, p, n));
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Epochs trained during the early-stopping phase.
    pub phase_one_epochs: usize,
    /// The remembered epoch count `E`; `None` when early stopping is off.
    pub stopped_epoch: Option<usize>,
    /// Whether a validation-loss increase ended phase one before `max_epochs`.
    pub early_stop_triggered: bool,
    /// One entry per phase-one epoch.
    pub validation_losses: Vec<f64>,
    /// Epochs of the final fit on the whole training partition.
    pub epochs_run: usize,
    pub training_losses: Vec<f64>,
    pub final_training_loss: f64,
}

/// A validation loss source for phase one: `(epoch, model) -> loss`.
pub type Evaluator<'a, M> = &'a mut dyn FnMut(usize, &M) -> f64;

/// Early-stopping fit of any [`PairwiseModel`].
///
/// 1. hold out a validation share of each user's training interactions;
/// 2. after every epoch on the rest, measure the validation loss;
/// 3. at the first epoch whose loss exceeds the previous one, stop and
///    remember the previous epoch `E` (or `E = max_epochs`);
/// 4. re-initialize from the same seed and train `E` epochs on the whole
///    training partition.
///
/// `init` must return an identically initialized model on every call.
/// `evaluator` replaces the built-in validation loss when given.
pub fn fit_pairwise<M: PairwiseModel>(
    dataset: &InteractionDataset,
    hp: &Hyperparams,
    mut init: impl FnMut() -> Result<M>,
    evaluator: Option<Evaluator<'_, M>>,
) -> Result<(M, TrainReport)> {
    hp.validate()?;
    if !dataset.interactions().iter().any(|it| it.partition.is_training()) {
        return Err(Error::Degenerate("training partition is empty".into()));
    }
    let mut validation_losses = Vec::new();
    let mut early_stop_triggered = false;
    let epochs = if hp.early_stopping {
        let inner = inner_validation_split(dataset, hp.validation_fraction, hp.seed);
        let sampler = PairSampler::new(&inner, |p| p == Partition::Train, hp.negatives);
        let pairs = validation_pairs(&inner, hp.negatives, hp.seed);
        let mut builtin = |_: usize, m: &M| mean_pair_loss(m, &pairs);
        let evaluate: Evaluator<'_, M> = match evaluator {
            Some(e) => e,
            None => {
                if pairs.is_empty() {
                    return Err(Error::Degenerate("validation split has no usable pairs".into()));
                }
                &mut builtin
            }
        };
        let mut model = init()?;
        let mut rng = rng::stream(hp.seed, rng::STREAM_SHUFFLE);
        let mut remembered = hp.max_epochs;
        for e in 1..=hp.max_epochs {
            epoch(&mut model, &sampler, hp, &mut rng)?;
            let loss = evaluate(e, &model);
            let increased = validation_losses.last().is_some_and(|&prev| loss > prev);
            validation_losses.push(loss);
            if increased {
                remembered = e - 1;
                early_stop_triggered = true;
                break;
            }
        }
        remembered
    } else {
        hp.max_epochs
    };

    let sampler = PairSampler::new(dataset, Partition::is_training, hp.negatives);
    let mut model = init()?;
    let mut rng = rng::stream(hp.seed, rng::STREAM_SHUFFLE);
    let mut training_losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        training_losses.push(epoch(&mut model, &sampler, hp, &mut rng)?);
    }
    let report = TrainReport {
        phase_one_epochs: validation_losses.len(),
        stopped_epoch: hp.early_stopping.then_some(epochs),
        early_stop_triggered,
        validation_losses,
        epochs_run: epochs,
        final_training_loss: training_losses.last().copied().unwrap_or(f64::NAN),
        training_losses,
    };
    Ok((model, report))
}

/// Trains an FM over the index's features with BPR and early stopping.
pub fn train_early_stopping(
    dataset: &InteractionDataset,
    index: &FeatureIndex,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    hp: &Hyperparams,
) -> Result<(FmRanker, TrainReport)> {
    train_early_stopping_with(dataset, index, knowledge, hp, None)
}

pub fn train_early_stopping_with(
    dataset: &InteractionDataset,
    index: &FeatureIndex,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    hp: &Hyperparams,
    evaluator: Option<Evaluator<'_, FmRanker>>,
) -> Result<(FmRanker, TrainReport)> {
    hp.validate()?;
    let template = FmRanker::new(
        FmModel::init(index.dim(), hp.num_factors, hp.init_stddev, hp.seed)?,
        dataset,
        index,
        knowledge,
    )?;
    fit_pairwise(dataset, hp, || Ok(template.clone()), evaluator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::UserId;

    #[test]
    fn loss_values() {
        assert!((bpr_pair_loss(0.3, 0.3) - core::f64::consts::LN_2).abs() < 1e-15);
        let expected = math::ln(1.0 + math::exp(-1.0));
        assert!((bpr_pair_loss(1.0, 0.0) - expected).abs() < 1e-15);
        assert!((bpr_pair_loss(1.0, 0.0) - 0.3133).abs() < 1e-4);
        let tiny = bpr_pair_loss(50.0, 0.0);
        assert!(tiny > 0.0 && tiny < 1e-20);
        let huge = bpr_pair_loss(-800.0, 0.0);
        assert!(huge.is_finite() && (huge - 800.0).abs() < 1e-9);
    }

    fn sv(e: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_entries(e.to_vec()).unwrap()
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut model = FmModel::init(6, 3, 0.1, 5).unwrap();
        model.linear_mut().iter_mut().enumerate().for_each(|(i, w)| *w = i as f64 * 0.1);
        let before = model.clone();
        let hp = Hyperparams {
            learning_rate: 0.0,
            ..Hyperparams::default()
        };
        sgd_pair_step(&mut model, &sv(&[(0, 1.0), (2, 1.0)]), &sv(&[(0, 1.0), (3, 1.0)]), &hp)
            .unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn identical_inputs_only_shrink() {
        let mut model = FmModel::init(4, 2, 0.1, 2).unwrap();
        model.linear_mut()[1] = 0.5;
        let before = model.clone();
        let hp = Hyperparams {
            learning_rate: 0.1,
            l2_reg: 0.5,
            ..Hyperparams::default()
        };
        let x = sv(&[(1, 1.0), (2, 1.0)]);
        sgd_pair_step(&mut model, &x, &x, &hp).unwrap();
        for i in [1, 2] {
            assert!((model.linear()[i] - before.linear()[i] * 0.95).abs() < 1e-15);
            for f in 0..2 {
                assert!((model.factor(i)[f] - before.factor(i)[f] * 0.95).abs() < 1e-15);
            }
        }
        assert_eq!(model.factor(0), before.factor(0));
        assert_eq!(model.factor(3), before.factor(3));
    }

    #[test]
    fn untouched_parameters_never_move() {
        let mut model = FmModel::init(8, 3, 0.3, 9).unwrap();
        let before = model.clone();
        let hp = Hyperparams {
            learning_rate: 0.2,
            l2_reg: 0.1,
            ..Hyperparams::default()
        };
        sgd_pair_step(&mut model, &sv(&[(0, 1.0), (5, 0.5)]), &sv(&[(0, 1.0), (6, 1.0)]), &hp)
            .unwrap();
        assert_eq!(model.bias(), before.bias());
        for i in [1, 2, 3, 4, 7] {
            assert_eq!(model.linear()[i], before.linear()[i]);
            assert_eq!(model.factor(i), before.factor(i));
        }
        assert_ne!(model.factor(5), before.factor(5));
    }

    #[test]
    fn step_decreases_regularized_pair_loss() {
        let hp = Hyperparams {
            learning_rate: 1e-3,
            l2_reg: 0.01,
            ..Hyperparams::default()
        };
        let x_pos = sv(&[(0, 1.0), (2, 1.0), (4, 0.5), (5, 0.5)]);
        let x_neg = sv(&[(0, 1.0), (3, 1.0), (5, 1.0)]);
        let reg_loss = |m: &FmModel| {
            let mut r = 0.0;
            for i in [0, 2, 3, 4, 5] {
                r += m.linear()[i] * m.linear()[i];
                r += m.factor(i).iter().map(|v| v * v).sum::<f64>();
            }
            bpr_pair_loss(m.predict(&x_pos).unwrap(), m.predict(&x_neg).unwrap())
                + 0.5 * hp.l2_reg * r
        };
        for seed in 0..20 {
            let mut model = FmModel::init(6, 4, 0.5, seed).unwrap();
            let before = reg_loss(&model);
            sgd_pair_step(&mut model, &x_pos, &x_neg, &hp).unwrap();
            assert!(reg_loss(&model) < before, "seed {seed}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut model = FmModel::zeros(3, 2);
        let hp = Hyperparams::default();
        assert!(sgd_pair_step(&mut model, &sv(&[(3, 1.0)]), &sv(&[(0, 1.0)]), &hp).is_err());
    }

    fn tiny_dataset() -> InteractionDataset {
        // 5 users, 10 items: users like even items and dislike odd items.
        let mut labels = alloc::vec::Vec::new();
        for u in 0..5u32 {
            for i in 0..10u32 {
                if (i + u) % 3 != 0 {
                    labels.push((UserId(u), ItemId(i), i % 2 == 0));
                }
            }
        }
        InteractionDataset::from_labels(labels, []).unwrap()
    }

    fn tiny_index(ds: &InteractionDataset) -> FeatureIndex {
        crate::features::build_feature_index(
            &BTreeMap::new(),
            ds.users(),
            ds.items(),
            crate::knowledge::FeatureConfig::NONE,
        )
        .unwrap()
    }

    #[test]
    fn zero_model_epoch_is_ln2() {
        let ds = tiny_dataset();
        let index = tiny_index(&ds);
        let mut ranker = FmRanker::new(FmModel::zeros(index.dim(), 4), &ds, &index, &BTreeMap::new())
            .unwrap();
        let hp = Hyperparams {
            learning_rate: 0.0,
            ..Hyperparams::default()
        };
        let sampler = PairSampler::new(&ds, Partition::is_training, NegativeRegime::Explicit);
        let mut rng = rng::stream(1, rng::STREAM_SHUFFLE);
        let loss = epoch(&mut ranker, &sampler, &hp, &mut rng).unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn epoch_loss_goes_down() {
        let ds = tiny_dataset();
        let index = tiny_index(&ds);
        let hp = Hyperparams {
            num_factors: 4,
            learning_rate: 0.1,
            init_stddev: 0.1,
            ..Hyperparams::default()
        };
        let mut ranker = FmRanker::new(
            FmModel::init(index.dim(), 4, 0.1, 3).unwrap(),
            &ds,
            &index,
            &BTreeMap::new(),
        )
        .unwrap();
        let sampler = PairSampler::new(&ds, Partition::is_training, hp.negatives);
        let mut rng = rng::stream(3, rng::STREAM_SHUFFLE);
        let first = epoch(&mut ranker, &sampler, &hp, &mut rng).unwrap();
        let mut last = first;
        for _ in 1..50 {
            last = epoch(&mut ranker, &sampler, &hp, &mut rng).unwrap();
        }
        assert!(last < first, "{last} !< {first}");
    }

    #[test]
    fn epoch_without_negatives_is_degenerate() {
        let labels = (0..4u32).map(|i| (UserId(0), ItemId(i), true));
        let ds = InteractionDataset::from_labels(labels, []).unwrap();
        let index = tiny_index(&ds);
        let mut ranker =
            FmRanker::new(FmModel::zeros(index.dim(), 2), &ds, &index, &BTreeMap::new()).unwrap();
        let sampler = PairSampler::new(&ds, Partition::is_training, NegativeRegime::Explicit);
        let mut rng = rng::stream(0, 0);
        assert!(matches!(
            epoch(&mut ranker, &sampler, &Hyperparams::default(), &mut rng),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn full_strategy_visits_product() {
        let ds = tiny_dataset();
        let sampler = PairSampler::new(&ds, Partition::is_training, NegativeRegime::Explicit);
        let expected: usize = (0..ds.num_users())
            .map(|u| {
                ds.items_where(u, true, |_| true).len() * ds.items_where(u, false, |_| true).len()
            })
            .sum();
        assert_eq!(sampler.all_pairs().len(), expected);
    }

    #[test]
    fn unseen_negatives_exclude_positives() {
        let ds = tiny_dataset();
        let sampler = PairSampler::new(&ds, Partition::is_training, NegativeRegime::Unseen);
        let mut rng = rng::stream(4, 0);
        for _ in 0..200 {
            let n = sampler.sample_negative(2, &mut rng).unwrap();
            assert!(!sampler.positives(2).contains(&n));
        }
    }

    #[test]
    fn inner_split_sizes() {
        let ds = tiny_dataset();
        let inner = inner_validation_split(&ds, 0.1, 5);
        for u in 0..ds.num_users() {
            let n = ds.user_interactions(u).len();
            let held = inner
                .user_interactions(u)
                .iter()
                .filter(|it| it.partition == Partition::Validation)
                .count();
            assert_eq!(held, ((0.1 * n as f64).round() as usize).clamp(1, n - 1));
        }
        assert_eq!(inner, inner_validation_split(&ds, 0.1, 5));
    }

    #[test]
    fn stub_evaluator_first_increase() {
        let ds = tiny_dataset();
        let index = tiny_index(&ds);
        let hp = Hyperparams {
            num_factors: 2,
            max_epochs: 10,
            ..Hyperparams::default()
        };
        let losses = [0.9, 0.7, 0.8, 0.1];
        let mut calls = 0;
        let mut stub = |e: usize, _: &FmRanker| {
            calls += 1;
            losses[e - 1]
        };
        let (_, report) =
            train_early_stopping_with(&ds, &index, &BTreeMap::new(), &hp, Some(&mut stub))
                .unwrap();
        assert_eq!(calls, 3);
        assert_eq!(report.phase_one_epochs, 3);
        assert_eq!(report.stopped_epoch, Some(2));
        assert!(report.early_stop_triggered);
        assert_eq!(report.epochs_run, 2);
        assert_eq!(report.training_losses.len(), 2);
    }

    #[test]
    fn no_increase_runs_max_epochs() {
        let ds = tiny_dataset();
        let index = tiny_index(&ds);
        let hp = Hyperparams {
            num_factors: 2,
            max_epochs: 6,
            ..Hyperparams::default()
        };
        let mut stub = |e: usize, _: &FmRanker| 1.0 / e as f64;
        let (_, report) =
            train_early_stopping_with(&ds, &index, &BTreeMap::new(), &hp, Some(&mut stub))
                .unwrap();
        assert_eq!(report.stopped_epoch, Some(6));
        assert!(!report.early_stop_triggered);
        assert_eq!(report.epochs_run, 6);
        assert_eq!(report.validation_losses.len(), 6);
    }

    #[test]
    fn hyperparam_validation() {
        let bad = [
            Hyperparams { num_factors: 0, ..Hyperparams::default() },
            Hyperparams { learning_rate: -1.0, ..Hyperparams::default() },
            Hyperparams { init_stddev: 0.0, ..Hyperparams::default() },
            Hyperparams { max_epochs: 0, ..Hyperparams::default() },
            Hyperparams { validation_fraction: 1.0, ..Hyperparams::default() },
        ];
        for hp in bad {
            assert!(hp.validate().is_err());
        }
        assert!(Hyperparams::default().validate().is_ok());
    }
}
