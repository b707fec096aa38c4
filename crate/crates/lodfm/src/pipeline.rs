//! End-to-end commands shared by the CLI and the tests.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use lodfm_core::experiment::{
    evaluate_trained, run_ablation, run_comparison, run_dim_sweep, train_model, ModelRun,
    ModelSpec, SignificanceConfig,
};
use lodfm_core::knowledge::apply_pagerank_normalization;
use lodfm_core::synthetic::{generate, SyntheticConfig};
use lodfm_core::{
    binarize_and_stats, split_train_test, DatasetStats, FeatureConfig, InteractionDataset, ItemId,
    ItemKnowledge, PairStrategy,
};
use sha2::{Digest, Sha256};

use crate::cache::{CacheEntry, FeatureCache};
use crate::config::ExperimentConfig;
use crate::fetch::{knowledge_to_bindings, Fetcher};
use crate::movielens::{load_mapping, load_ratings, write_mapping, write_ratings};
use crate::plot::{line_chart, to_csv, Series};
use crate::report::{persist_run, ExperimentReport, ReportContext};
use crate::replication::replication_notes;
use crate::sparql::SparqlClient;

/// The split dataset plus the item knowledge its models need.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: InteractionDataset,
    pub stats: DatasetStats,
    pub knowledge: BTreeMap<ItemId, ItemKnowledge>,
    pub cache_fingerprint: String,
}

pub fn fetcher_for(cfg: &ExperimentConfig) -> anyhow::Result<Fetcher> {
    let client = match &cfg.endpoint {
        Some(e) => Some(SparqlClient::new(e.clone())?),
        None => None,
    };
    Ok(Fetcher::new(client, FeatureCache::new(&cfg.cache_dir)))
}

pub fn prepare(cfg: &ExperimentConfig, sets: FeatureConfig) -> anyhow::Result<Prepared> {
    cfg.validate()?;
    let records = load_ratings(&cfg.ratings)?;
    let mapping = load_mapping(&cfg.mapping)?;
    let mapped = mapping.keys().copied().collect();
    let (full, stats) = binarize_and_stats(&records, &mapped)?;
    log::info!(
        "{} users, {} items, {} ratings, sparsity {:.4}, {:.1}% positive",
        stats.users, stats.items, stats.ratings, stats.sparsity, stats.positive_percentage
    );
    let dataset = split_train_test(&full, cfg.split_seed);

    let mut knowledge = BTreeMap::new();
    if sets != FeatureConfig::NONE {
        let fetcher = fetcher_for(cfg)?;
        let uris: Vec<String> = dataset.items().iter().map(|i| mapping[i].clone()).collect();
        let concurrency = cfg.endpoint.as_ref().map_or(1, |e| e.max_concurrent);
        let report = fetcher.fetch_all(&uris, sets, concurrency);
        if let Some(first) = report.failures.first() {
            bail!(
                "features missing for {} of {} items (first: {}: {})",
                report.failures.len(),
                uris.len(),
                first.item,
                first.message
            );
        }
        for (&item, uri) in dataset.items().iter().zip(&uris) {
            knowledge.insert(item, report.knowledge[uri].clone());
        }
        if sets.pr {
            apply_pagerank_normalization(&mut knowledge)?;
        }
    }
    let cache_fingerprint = hex::encode(Sha256::digest(serde_json::to_string(&knowledge)?.as_bytes()));
    Ok(Prepared {
        dataset,
        stats,
        knowledge,
        cache_fingerprint,
    })
}

pub fn model_spec(cfg: &ExperimentConfig, id: &str) -> anyhow::Result<ModelSpec> {
    Ok(match id {
        "poprank" => ModelSpec::PopRank,
        "knn" => ModelSpec::Knn { k: cfg.knn_k },
        "bprmf" => ModelSpec::Bprmf { hp: cfg.bprmf.clone() },
        "lodfm" => ModelSpec::LodFm {
            features: cfg.feature_config()?,
            hp: cfg.fm.clone(),
        },
        other => bail!("unknown model {other:?}"),
    })
}

fn needed_sets(specs: &[ModelSpec]) -> FeatureConfig {
    let mut sets = FeatureConfig::NONE;
    for s in specs {
        if let ModelSpec::LodFm { features, .. } = s {
            sets.po |= features.po;
            sets.sp |= features.sp;
            sets.pr |= features.pr;
        }
    }
    sets
}

fn context(cfg: &ExperimentConfig, prepared: &Prepared) -> ReportContext {
    ReportContext {
        config_fingerprint: cfg.fingerprint(),
        cache_fingerprint: prepared.cache_fingerprint.clone(),
        split_seed: cfg.split_seed,
        candidates: cfg.candidates,
        cutoffs: cfg.cutoffs.clone(),
        dataset: prepared.stats,
        resamples: cfg.resamples,
    }
}

fn significance(cfg: &ExperimentConfig, baseline: Option<usize>) -> Option<SignificanceConfig> {
    Some(SignificanceConfig {
        baseline: baseline.filter(|_| cfg.significance)?,
        resamples: cfg.resamples,
        seed: cfg.split_seed,
    })
}

fn persist(dir: &Path) -> impl FnMut(&ModelRun) -> lodfm_core::Result<()> + '_ {
    let mut position = 0;
    move |run| {
        position += 1;
        log::info!("finished {}", run.report.model);
        persist_run(dir, position, run)
            .map_err(|e| lodfm_core::Error::InvalidArgument(format!("persisting run: {e:#}")))
    }
}

/// Per-cutoff nDCG, precision and recall curves for each model.
fn cutoff_series(runs: &[ModelRun]) -> Vec<Series> {
    let mut out = Vec::new();
    for metric in ["nDCG", "P", "R"] {
        for run in runs {
            let points = run
                .report
                .cutoffs
                .iter()
                .filter_map(|n| run.report.mean(&format!("{metric}@{n}")).map(|v| (*n as f64, v)))
                .collect();
            out.push(Series {
                name: format!("{} {metric}", run.report.model),
                points,
            });
        }
    }
    out
}

fn write_series(dir: &Path, series: &[Series], x: &str, title: &str, plot: &str) -> anyhow::Result<()> {
    std::fs::write(dir.join("series.csv"), to_csv(series, x, "value"))?;
    std::fs::write(dir.join(plot), line_chart(title, x, "value", series))?;
    Ok(())
}

pub fn compare(cfg: &ExperimentConfig, replicate: bool) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    let specs = cfg
        .models
        .iter()
        .map(|m| model_spec(cfg, m))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let prepared = prepare(cfg, needed_sets(&specs))?;
    let baseline = cfg.models.iter().position(|m| *m == cfg.baseline);
    if cfg.significance && baseline.is_none() && cfg.models.len() > 1 {
        log::warn!("baseline {:?} is not in the line-up; skipping significance tests", cfg.baseline);
    }
    let dir = &cfg.output_dir;
    let cmp = run_comparison(
        &prepared.dataset,
        &prepared.knowledge,
        &specs,
        &cfg.eval_config(),
        significance(cfg, baseline).as_ref(),
        persist(dir),
    )?;
    let mut report = ExperimentReport::new("comparison", &cmp.runs, cmp.significance, context(cfg, &prepared));
    if replicate {
        report.notes.extend(replication_notes(&report));
        for n in &report.notes {
            log::info!("{n}");
        }
    }
    report.write(dir)?;
    write_series(dir, &cutoff_series(&cmp.runs), "N", "Metrics by cutoff", "cutoffs.svg")?;
    Ok(report)
}

pub fn ablate(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    let prepared = prepare(cfg, FeatureConfig::ALL)?;
    let hp = lodfm_core::Hyperparams {
        num_factors: cfg.ablation_m,
        ..cfg.fm.clone()
    };
    let dir = &cfg.output_dir;
    let cmp = run_ablation(
        &prepared.dataset,
        &prepared.knowledge,
        &FeatureConfig::ABLATION,
        &hp,
        &cfg.eval_config(),
        significance(cfg, Some(0)).as_ref(),
        persist(dir),
    )?;
    let report = ExperimentReport::new("ablation", &cmp.runs, cmp.significance, context(cfg, &prepared));
    report.write(dir)?;
    write_series(dir, &cutoff_series(&cmp.runs), "N", "Feature sets by cutoff", "cutoffs.svg")?;
    Ok(report)
}

pub fn sweep(cfg: &ExperimentConfig, dims: &[usize]) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    let features = cfg.feature_config()?;
    let prepared = prepare(cfg, features)?;
    let dir = &cfg.output_dir;
    let result = run_dim_sweep(
        &prepared.dataset,
        &prepared.knowledge,
        features,
        &cfg.fm,
        dims,
        &cfg.eval_config(),
        persist(dir),
    )?;
    let mut report = ExperimentReport::new("sweep", &result.runs, Vec::new(), context(cfg, &prepared));
    for m in &result.repeated {
        log::warn!("dimensionality {m} listed more than once; running it once");
        report.notes.push(format!("repeated m = {m} ignored"));
    }
    report.write(dir)?;
    let names = result.runs[0].report.metrics.iter().map(|m| m.name.clone());
    let series: Vec<Series> = names
        .map(|name| Series {
            points: result
                .dims
                .iter()
                .zip(&result.runs)
                .map(|(&m, run)| (m as f64, run.report.mean(&name).unwrap_or(f64::NAN)))
                .collect(),
            name,
        })
        .collect();
    write_series(dir, &series, "m", "Metrics by dimensionality", "sweep.svg")?;
    Ok(report)
}

pub fn train(cfg: &ExperimentConfig, model: &str, out: &Path) -> anyhow::Result<()> {
    let spec = model_spec(cfg, model)?;
    let prepared = prepare(cfg, needed_sets(std::slice::from_ref(&spec)))?;
    let trained = train_model(&spec, &prepared.dataset, &prepared.knowledge)?;
    if let Some(r) = trained.train_report() {
        log::info!("trained {} epochs (final loss {:.5})", r.epochs_run, r.final_training_loss);
    }
    crate::checkpoint::save(out, &spec, &trained, &cfg.fingerprint())
}

pub fn evaluate(cfg: &ExperimentConfig, checkpoint: &Path) -> anyhow::Result<ExperimentReport> {
    let ckpt = crate::checkpoint::read(checkpoint)?;
    if ckpt.config_fingerprint != cfg.fingerprint() {
        log::warn!("checkpoint was trained under a different configuration");
    }
    let prepared = prepare(cfg, needed_sets(std::slice::from_ref(&ckpt.spec)))?;
    let (ckpt, trained) = crate::checkpoint::load(checkpoint, &prepared.dataset, &prepared.knowledge)?;
    let run = evaluate_trained(&ckpt.spec, &trained, &prepared.dataset, &cfg.eval_config())?;
    let report = ExperimentReport::new("evaluation", &[run], Vec::new(), context(cfg, &prepared));
    report.write(&cfg.output_dir)?;
    Ok(report)
}

/// Writes a synthetic catalog as rating, mapping and cache files, plus a
/// config that runs against them offline. Returns the config path.
pub fn synth(out: &Path, seed: u64, synthetic: &SyntheticConfig) -> anyhow::Result<std::path::PathBuf> {
    let data = generate(synthetic, seed)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("ratings.dat"), write_ratings(&data.records))?;
    std::fs::write(out.join("mapping.tsv"), write_mapping(&data.uris))?;
    let cache = FeatureCache::new(out.join("cache"));
    for (item, k) in &data.knowledge {
        for (template, bindings) in knowledge_to_bindings(k) {
            cache.store(&CacheEntry {
                item: data.uris[item].clone(),
                template: template.id().into(),
                bindings,
                fetched_at: 0,
            })?;
        }
    }
    let mut cfg = ExperimentConfig {
        ratings: "ratings.dat".into(),
        mapping: "mapping.tsv".into(),
        cache_dir: "cache".into(),
        output_dir: "out".into(),
        features: "po".into(),
        split_seed: seed,
        ..ExperimentConfig::default()
    };
    for hp in [&mut cfg.fm, &mut cfg.bprmf] {
        hp.num_factors = 10;
        hp.pair_strategy = PairStrategy::Full;
        hp.seed = seed;
    }
    cfg.sweep_m = vec![2, 8, 32];
    let path = out.join("config.toml");
    std::fs::write(&path, cfg.to_toml()?)?;
    Ok(path)
}
