//! Per-item background knowledge and its normalization.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ItemId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Outgoing `(property, object)` pairs.
    Po,
    /// Incoming `(subject, property)` pairs.
    Sp,
    /// Normalized PageRank score.
    Pr,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Po => "po",
            FeatureSet::Sp => "sp",
            FeatureSet::Pr => "pr",
        }
    }
}

/// Which knowledge blocks are appended after the user/item one-hots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub po: bool,
    pub sp: bool,
    pub pr: bool,
}

impl FeatureConfig {
    pub const NONE: FeatureConfig = FeatureConfig {
        po: false,
        sp: false,
        pr: false,
    };
    pub const PO: FeatureConfig = FeatureConfig {
        po: true,
        sp: false,
        pr: false,
    };
    pub const PO_SP: FeatureConfig = FeatureConfig {
        po: true,
        sp: true,
        pr: false,
    };
    pub const PO_PR: FeatureConfig = FeatureConfig {
        po: true,
        sp: false,
        pr: true,
    };
    pub const ALL: FeatureConfig = FeatureConfig {
        po: true,
        sp: true,
        pr: true,
    };

    /// The four configurations compared in a feature ablation.
    pub const ABLATION: [FeatureConfig; 4] = [Self::PO, Self::PO_SP, Self::PO_PR, Self::ALL];

    pub fn contains(&self, set: FeatureSet) -> bool {
        match set {
            FeatureSet::Po => self.po,
            FeatureSet::Sp => self.sp,
            FeatureSet::Pr => self.pr,
        }
    }

    pub fn sets(&self) -> impl Iterator<Item = FeatureSet> + '_ {
        [FeatureSet::Po, FeatureSet::Sp, FeatureSet::Pr]
            .into_iter()
            .filter(|s| self.contains(*s))
    }

    /// Column label such as `PO+SP+PR`, or `none`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.sets().map(|s| s.as_str().to_uppercase()).collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.sets().map(FeatureSet::as_str).collect();
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

impl FromStr for FeatureConfig {
    type Err = Error;

    /// Parses `po,sp,pr` style lists; `none` or the empty string is the empty set.
    fn from_str(s: &str) -> Result<Self> {
        let mut config = FeatureConfig::NONE;
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "po" => config.po = true,
                "sp" => config.sp = true,
                "pr" => config.pr = true,
                "none" => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown feature set {other:?}"
                    )))
                }
            }
        }
        Ok(config)
    }
}

/// What the knowledge graph knows about one item.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemKnowledge {
    /// Sorted, distinct `(property, object)` pairs.
    pub po: Vec<(String, String)>,
    /// Sorted, distinct `(subject, property)` pairs.
    pub sp: Vec<(String, String)>,
    pub pagerank_raw: Option<f64>,
    /// `pagerank_raw` divided by the catalog maximum; filled by
    /// [`apply_pagerank_normalization`].
    pub pagerank: Option<f64>,
}

impl ItemKnowledge {
    pub fn new(
        mut po: Vec<(String, String)>,
        mut sp: Vec<(String, String)>,
        pagerank_raw: Option<f64>,
    ) -> Result<Self> {
        if let Some(score) = pagerank_raw {
            if !score.is_finite() || score < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "PageRank score must be finite and non-negative, got {score}"
                )));
            }
        }
        po.sort();
        po.dedup();
        sp.sort();
        sp.dedup();
        Ok(Self {
            po,
            sp,
            pagerank_raw,
            pagerank: None,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }
}

/// Divides every present score by the maximum present score; absent scores map to 0.
pub fn normalize_pagerank<K: Ord + Clone>(
    raw: &BTreeMap<K, Option<f64>>,
) -> Result<BTreeMap<K, f64>> {
    let max = raw
        .values()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Degenerate(
            "no item has a positive PageRank score".into(),
        ));
    }
    Ok(raw
        .iter()
        .map(|(k, v)| (k.clone(), v.map_or(0.0, |s| s / max)))
        .collect())
}

/// Fills `pagerank` on every item from [`normalize_pagerank`].
pub fn apply_pagerank_normalization(
    knowledge: &mut BTreeMap<ItemId, ItemKnowledge>,
) -> Result<()> {
    let raw: BTreeMap<ItemId, Option<f64>> = knowledge
        .iter()
        .map(|(&k, v)| (k, v.pagerank_raw))
        .collect();
    let normalized = normalize_pagerank(&raw)?;
    for (item, value) in normalized {
        if let Some(k) = knowledge.get_mut(&item) {
            k.pagerank = Some(value);
        }
    }
    Ok(())
}
