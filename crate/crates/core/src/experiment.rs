//! Training and evaluating model line-ups on one shared split.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::{bprmf_train, KnnItem, MfModel, PopRank, DEFAULT_NEIGHBORS};
use crate::dataset::{InteractionDataset, ItemId, Partition};
use crate::error::{Error, Result};
use crate::eval::{bootstrap_paired_ttest, evaluate, pairwise_auc, EvalConfig, MetricReport, Recommender};
use crate::features::{build_feature_index, FeatureIndex};
use crate::knowledge::{FeatureConfig, ItemKnowledge};
use crate::training::{train_early_stopping, FmRanker, Hyperparams, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelSpec {
    PopRank,
    Knn { k: usize },
    Bprmf { hp: Hyperparams },
    LodFm { features: FeatureConfig, hp: Hyperparams },
}

impl ModelSpec {
    pub fn knn() -> Self {
        ModelSpec::Knn { k: DEFAULT_NEIGHBORS }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::PopRank => "poprank",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Bprmf { .. } => "bprmf",
            ModelSpec::LodFm { .. } => "lodfm",
        }
    }

    /// Column name in reports.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::PopRank => "PopRank".into(),
            ModelSpec::Knn { .. } => "kNN-item".into(),
            ModelSpec::Bprmf { .. } => "BPRMF".into(),
            ModelSpec::LodFm { features, .. } => format!("LODFM {}", features.label()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    PopRank(PopRank),
    Knn(KnnItem),
    Bprmf(MfModel, TrainReport),
    LodFm(FmRanker, FeatureIndex, TrainReport),
}

impl TrainedModel {
    pub fn train_report(&self) -> Option<&TrainReport> {
        match self {
            TrainedModel::Bprmf(_, r) | TrainedModel::LodFm(_, _, r) => Some(r),
            _ => None,
        }
    }

    /// Runs `f` with this model's [`Recommender`] view.
    pub fn with_recommender<T>(&self, f: impl FnOnce(&dyn Recommender) -> T) -> T {
        match self {
            TrainedModel::PopRank(m) => f(m),
            TrainedModel::Knn(m) => f(m),
            TrainedModel::Bprmf(m, _) => f(m),
            TrainedModel::LodFm(m, _, _) => f(&m.scorer()),
        }
    }
}

/// Trains `spec` on the training partition of `dataset`.
pub fn train_model(
    spec: &ModelSpec,
    dataset: &InteractionDataset,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
) -> Result<TrainedModel> {
    Ok(match spec {
        ModelSpec::PopRank => TrainedModel::PopRank(PopRank::train(dataset)?),
        ModelSpec::Knn { k } => TrainedModel::Knn(KnnItem::train(dataset, *k)?),
        ModelSpec::Bprmf { hp } => {
            let (m, r) = bprmf_train(dataset, hp)?;
            TrainedModel::Bprmf(m, r)
        }
        ModelSpec::LodFm { features, hp } => {
            let index = build_feature_index(knowledge, dataset.users(), dataset.items(), *features)?;
            let (m, r) = train_early_stopping(dataset, &index, knowledge, hp)?;
            TrainedModel::LodFm(m, index, r)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub spec: ModelSpec,
    pub report: MetricReport,
    pub train: Option<TrainReport>,
    /// Share of training (positive, explicit negative) pairs ranked correctly.
    pub training_auc: Option<f64>,
}

pub fn run_model(
    spec: &ModelSpec,
    dataset: &InteractionDataset,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    eval: &EvalConfig,
) -> Result<ModelRun> {
    let trained = train_model(spec, dataset, knowledge)?;
    evaluate_trained(spec, &trained, dataset, eval)
}

pub fn evaluate_trained(
    spec: &ModelSpec,
    trained: &TrainedModel,
    dataset: &InteractionDataset,
    eval: &EvalConfig,
) -> Result<ModelRun> {
    let (report, training_auc) = trained.with_recommender(|rec| {
        let report = evaluate(rec, dataset, eval, &spec.label())?;
        let auc = pairwise_auc(rec, dataset, Partition::is_training).ok();
        Ok::<_, Error>((report, auc))
    })?;
    Ok(ModelRun {
        spec: spec.clone(),
        report,
        train: trained.train_report().cloned(),
        training_auc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    /// Position of the reference model in the line-up.
    pub baseline: usize,
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    pub model: String,
    pub baseline: String,
    pub metric: String,
    pub p_value: f64,
    pub t_statistic: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub runs: Vec<ModelRun>,
    pub significance: Vec<SignificanceEntry>,
}

/// Paired tests of every run against `runs[config.baseline]`, metric by metric.
pub fn significance_against(
    runs: &[ModelRun],
    config: &SignificanceConfig,
) -> Result<Vec<SignificanceEntry>> {
    let base = runs
        .get(config.baseline)
        .ok_or_else(|| Error::InvalidArgument(format!("no model at position {}", config.baseline)))?;
    let mut out = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        if k == config.baseline {
            continue;
        }
        if run.report.users != base.report.users {
            return Err(Error::InvalidArgument("reports cover different users".into()));
        }
        for series in &run.report.metrics {
            let reference = base
                .report
                .series(&series.name)
                .ok_or_else(|| Error::InvalidArgument(format!("baseline lacks {}", series.name)))?;
            let t = bootstrap_paired_ttest(&series.per_user, &reference.per_user, config.resamples, config.seed)?;
            out.push(SignificanceEntry {
                model: run.report.model.clone(),
                baseline: base.report.model.clone(),
                metric: series.name.clone(),
                p_value: t.p_value,
                t_statistic: t.t_statistic,
                degenerate: t.degenerate,
            });
        }
    }
    Ok(out)
}

/// Trains and evaluates every spec on the same split; `on_run` sees each
/// finished run before the next one starts.
pub fn run_comparison(
    dataset: &InteractionDataset,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    specs: &[ModelSpec],
    eval: &EvalConfig,
    significance: Option<&SignificanceConfig>,
    mut on_run: impl FnMut(&ModelRun) -> Result<()>,
) -> Result<Comparison> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no models selected".into()));
    }
    let mut runs = Vec::with_capacity(specs.len());
    for spec in specs {
        let run = run_model(spec, dataset, knowledge, eval)?;
        on_run(&run)?;
        runs.push(run);
    }
    let significance = match significance {
        Some(cfg) if runs.len() > 1 => significance_against(&runs, cfg)?,
        _ => Vec::new(),
    };
    Ok(Comparison { runs, significance })
}

/// Line-up of FMs differing only in their item feature sets.
pub fn ablation_specs(configs: &[FeatureConfig], hp: &Hyperparams) -> Vec<ModelSpec> {
    configs
        .iter()
        .map(|&features| ModelSpec::LodFm {
            features,
            hp: hp.clone(),
        })
        .collect()
}

pub fn run_ablation(
    dataset: &InteractionDataset,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    configs: &[FeatureConfig],
    hp: &Hyperparams,
    eval: &EvalConfig,
    significance: Option<&SignificanceConfig>,
    on_run: impl FnMut(&ModelRun) -> Result<()>,
) -> Result<Comparison> {
    run_comparison(dataset, knowledge, &ablation_specs(configs, hp), eval, significance, on_run)
}

/// Keeps the first occurrence of each `m`; returns the repeats separately.
pub fn dedup_dims(values: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut repeats = Vec::new();
    for &m in values {
        if kept.contains(&m) {
            repeats.push(m);
        } else {
            kept.push(m);
        }
    }
    (kept, repeats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSweep {
    pub dims: Vec<usize>,
    pub runs: Vec<ModelRun>,
    /// Values dropped because they repeated an earlier one.
    pub repeated: Vec<usize>,
}

pub fn run_dim_sweep(
    dataset: &InteractionDataset,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    features: FeatureConfig,
    hp: &Hyperparams,
    dims: &[usize],
    eval: &EvalConfig,
    mut on_run: impl FnMut(&ModelRun) -> Result<()>,
) -> Result<DimSweep> {
    let (dims, repeated) = dedup_dims(dims);
    if dims.is_empty() {
        return Err(Error::InvalidArgument("no dimensionality given".into()));
    }
    let mut runs = Vec::with_capacity(dims.len());
    for &m in &dims {
        let spec = ModelSpec::LodFm {
            features,
            hp: Hyperparams {
                num_factors: m,
                ..hp.clone()
            },
        };
        let mut run = run_model(&spec, dataset, knowledge, eval)?;
        run.report.model = format!("{} m={m}", run.report.model);
        on_run(&run)?;
        runs.push(run);
    }
    Ok(DimSweep {
        dims,
        runs,
        repeated,
    })
}
