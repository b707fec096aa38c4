//! Trained-model files: `checkpoint.json` plus, for FMs, the `features.tsv`
//! index whose SHA-256 the checkpoint records.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use lodfm_core::baselines::MfModel;
use lodfm_core::experiment::{ModelSpec, TrainedModel};
use lodfm_core::training::{FmRanker, TrainReport};
use lodfm_core::{FeatureIndex, FmModel, InteractionDataset, ItemId, ItemKnowledge};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const FEATURES_FILE: &str = "features.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Parameters {
    /// Count-based models are rebuilt from the training data on load.
    Derived,
    Bprmf { model: MfModel },
    Fm { model: FmModel, feature_index_sha256: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub config_fingerprint: String,
    pub parameters: Parameters,
    pub train: Option<TrainReport>,
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn save(dir: &Path, spec: &ModelSpec, trained: &TrainedModel, config_fingerprint: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let parameters = match trained {
        TrainedModel::PopRank(_) | TrainedModel::Knn(_) => Parameters::Derived,
        TrainedModel::Bprmf(m, _) => Parameters::Bprmf { model: m.clone() },
        TrainedModel::LodFm(ranker, index, _) => {
            let text = index.to_text();
            std::fs::write(dir.join(FEATURES_FILE), &text)?;
            Parameters::Fm {
                model: ranker.model.clone(),
                feature_index_sha256: sha256(&text),
            }
        }
    };
    let ckpt = Checkpoint {
        spec: spec.clone(),
        config_fingerprint: config_fingerprint.into(),
        parameters,
        train: trained.train_report().cloned(),
    };
    let mut json = serde_json::to_string_pretty(&ckpt)?;
    json.push('\n');
    std::fs::write(dir.join(CHECKPOINT_FILE), json)?;
    Ok(())
}

pub fn read(dir: &Path) -> anyhow::Result<Checkpoint> {
    let path = dir.join(CHECKPOINT_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

/// Restores a model bound to `dataset`; FM indexes must match their hash.
pub fn load(
    dir: &Path,
    dataset: &InteractionDataset,
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
) -> anyhow::Result<(Checkpoint, TrainedModel)> {
    let ckpt = read(dir)?;
    let trained = match (&ckpt.spec, &ckpt.parameters) {
        (spec @ (ModelSpec::PopRank | ModelSpec::Knn { .. }), Parameters::Derived) => {
            lodfm_core::experiment::train_model(spec, dataset, knowledge)?
        }
        (ModelSpec::Bprmf { .. }, Parameters::Bprmf { model }) => {
            model.check_shape(dataset.num_users(), dataset.num_items())?;
            TrainedModel::Bprmf(model.clone(), ckpt.train.clone().unwrap_or_default())
        }
        (ModelSpec::LodFm { .. }, Parameters::Fm { model, feature_index_sha256 }) => {
            let text = std::fs::read_to_string(dir.join(FEATURES_FILE))?;
            if &sha256(&text) != feature_index_sha256 {
                bail!("{FEATURES_FILE} does not match the checkpoint");
            }
            let index = FeatureIndex::from_text(&text)?;
            let model = FmModel::from_parts(
                model.bias(),
                model.linear().to_vec(),
                model.factors().to_vec(),
                model.num_factors(),
            )?;
            let ranker = FmRanker::new(model, dataset, &index, knowledge)?;
            TrainedModel::LodFm(ranker, index, ckpt.train.clone().unwrap_or_default())
        }
        _ => bail!("checkpoint parameters do not fit the model kind"),
    };
    Ok((ckpt, trained))
}
