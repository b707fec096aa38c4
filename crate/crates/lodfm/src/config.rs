//! Experiment configuration file (TOML) with CLI overrides applied on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use lodfm_core::eval::{CandidateSet, EvalConfig, DEFAULT_RESAMPLES};
use lodfm_core::{FeatureConfig, Hyperparams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sparql::SparqlEndpointConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ratings: PathBuf,
    pub mapping: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Item feature sets of the LODFM model, e.g. `"po,pr"`.
    pub features: String,
    /// Line-up for `compare`: any of `poprank`, `knn`, `bprmf`, `lodfm`.
    pub models: Vec<String>,
    pub split_seed: u64,
    pub cutoffs: Vec<usize>,
    pub candidates: CandidateSet,
    pub significance: bool,
    /// Reference model for the paired tests.
    pub baseline: String,
    pub resamples: usize,
    pub knn_k: usize,
    /// FM hyperparameters.
    pub fm: Hyperparams,
    pub bprmf: Hyperparams,
    /// Dimensionality of the feature-set ablation.
    pub ablation_m: usize,
    pub sweep_m: Vec<usize>,
    /// When absent, features come from the cache only.
    pub endpoint: Option<SparqlEndpointConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ratings: "ml-1m/ratings.dat".into(),
            mapping: "mapping.tsv".into(),
            cache_dir: "cache".into(),
            output_dir: "out".into(),
            features: "po,pr".into(),
            models: ["poprank", "knn", "bprmf", "lodfm"].map(String::from).to_vec(),
            split_seed: 42,
            cutoffs: vec![1, 5, 10],
            candidates: CandidateSet::All,
            significance: true,
            baseline: "bprmf".into(),
            resamples: DEFAULT_RESAMPLES,
            knn_k: lodfm_core::baselines::DEFAULT_NEIGHBORS,
            fm: Hyperparams::default(),
            bprmf: Hyperparams::bprmf(),
            ablation_m: 10,
            sweep_m: vec![10, 50, 100, 150, 200],
            endpoint: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // relative paths resolve against the config file's directory
        if let Some(base) = path.parent() {
            for p in [&mut cfg.ratings, &mut cfg.mapping, &mut cfg.cache_dir, &mut cfg.output_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn feature_config(&self) -> anyhow::Result<FeatureConfig> {
        self.features.parse().map_err(|e| anyhow::anyhow!("features: {e}"))
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            cutoffs: self.cutoffs.clone(),
            candidates: self.candidates,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (name, p) in [
            ("ratings", &self.ratings),
            ("mapping", &self.mapping),
            ("cache_dir", &self.cache_dir),
            ("output_dir", &self.output_dir),
        ] {
            if p.as_os_str().is_empty() {
                bail!("{name} path is empty");
            }
        }
        self.eval_config().validate()?;
        self.feature_config()?;
        self.fm.validate()?;
        self.bprmf.validate()?;
        if self.models.is_empty() {
            bail!("no models selected");
        }
        for m in &self.models {
            if !["poprank", "knn", "bprmf", "lodfm"].contains(&m.as_str()) {
                bail!("unknown model {m:?}");
            }
        }
        if let Some(e) = &self.endpoint {
            e.validate().map_err(anyhow::Error::msg)?;
        }
        Ok(())
    }

    /// SHA-256 of the settings that determine results. Paths are left out so
    /// moving a checkout does not change it.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.ratings = PathBuf::new();
        canonical.mapping = PathBuf::new();
        canonical.cache_dir = PathBuf::new();
        canonical.output_dir = PathBuf::new();
        canonical.endpoint = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
