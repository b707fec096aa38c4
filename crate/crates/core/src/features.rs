//! The global feature index and per-example assembly.
//!
//! Layout is `[users | items | PO pairs | SP pairs | PR]`; each block is
//! sorted by key and disabled blocks take no indices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::Range;

use crate::dataset::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::knowledge::{FeatureConfig, ItemKnowledge};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Block {
    User,
    Item,
    Po,
    Sp,
    Pr,
}

impl Block {
    pub fn as_str(self) -> &'static str {
        match self {
            Block::User => "user",
            Block::Item => "item",
            Block::Po => "po",
            Block::Sp => "sp",
            Block::Pr => "pr",
        }
    }

    fn parse(s: &str) -> Option<Block> {
        Some(match s {
            "user" => Block::User,
            "item" => Block::Item,
            "po" => Block::Po,
            "sp" => Block::Sp,
            "pr" => Block::Pr,
            _ => return None,
        })
    }
}

const PR_KEY: &str = "pagerank";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndex {
    users: Vec<UserId>,
    items: Vec<ItemId>,
    po: Vec<(String, String)>,
    sp: Vec<(String, String)>,
    config: FeatureConfig,
}

fn sorted_unique<T: Ord + Copy>(ids: &[T], kind: &'static str, raw: impl Fn(T) -> u32) -> Result<Vec<T>> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateId {
            kind,
            id: raw(w[0]),
        });
    }
    Ok(sorted)
}

/// Builds the index over all users, all items and the union of the items'
/// knowledge pairs for the enabled sets. Items without a knowledge entry
/// contribute nothing beyond their one-hot column.
pub fn build_feature_index(
    knowledge: &BTreeMap<ItemId, ItemKnowledge>,
    users: &[UserId],
    items: &[ItemId],
    config: FeatureConfig,
) -> Result<FeatureIndex> {
    let users = sorted_unique(users, "user", |u| u.0)?;
    let items = sorted_unique(items, "item", |i| i.0)?;
    let mut po = BTreeSet::new();
    let mut sp = BTreeSet::new();
    for item in &items {
        let Some(k) = knowledge.get(item) else { continue };
        if config.po {
            po.extend(k.po.iter().cloned());
        }
        if config.sp {
            sp.extend(k.sp.iter().cloned());
        }
    }
    Ok(FeatureIndex {
        users,
        items,
        po: po.into_iter().collect(),
        sp: sp.into_iter().collect(),
        config,
    })
}

impl FeatureIndex {
    pub fn config(&self) -> FeatureConfig {
        self.config
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn po_pairs(&self) -> &[(String, String)] {
        &self.po
    }

    pub fn sp_pairs(&self) -> &[(String, String)] {
        &self.sp
    }

    /// Index range occupied by `block`; empty for disabled blocks.
    pub fn block_range(&self, block: Block) -> Range<usize> {
        let user_end = self.users.len();
        let item_end = user_end + self.items.len();
        let po_end = item_end + self.po.len();
        let sp_end = po_end + self.sp.len();
        let pr_end = sp_end + usize::from(self.config.pr);
        match block {
            Block::User => 0..user_end,
            Block::Item => user_end..item_end,
            Block::Po => item_end..po_end,
            Block::Sp => po_end..sp_end,
            Block::Pr => sp_end..pr_end,
        }
    }

    /// Total dimensionality `p`.
    pub fn dim(&self) -> usize {
        self.block_range(Block::Pr).end
    }

    pub fn block_of(&self, index: usize) -> Option<Block> {
        [Block::User, Block::Item, Block::Po, Block::Sp, Block::Pr]
            .into_iter()
            .find(|&b| self.block_range(b).contains(&index))
    }

    pub fn user_feature(&self, user: UserId) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub fn item_feature(&self, item: ItemId) -> Option<usize> {
        let start = self.block_range(Block::Item).start;
        self.items.binary_search(&item).ok().map(|i| start + i)
    }

    fn pair_lookup(pairs: &[(String, String)], a: &str, b: &str) -> Option<usize> {
        pairs
            .binary_search_by(|(x, y)| (x.as_str(), y.as_str()).cmp(&(a, b)))
            .ok()
    }

    pub fn po_feature(&self, property: &str, object: &str) -> Option<usize> {
        Self::pair_lookup(&self.po, property, object).map(|i| self.block_range(Block::Po).start + i)
    }

    pub fn sp_feature(&self, subject: &str, property: &str) -> Option<usize> {
        Self::pair_lookup(&self.sp, subject, property).map(|i| self.block_range(Block::Sp).start + i)
    }

    pub fn pr_feature(&self) -> Option<usize> {
        self.config.pr.then(|| self.block_range(Block::Pr).start)
    }

    /// Human-readable key of a feature, as written to the index file.
    pub fn key(&self, index: usize) -> Option<(Block, String)> {
        let block = self.block_of(index)?;
        let offset = index - self.block_range(block).start;
        let key = match block {
            Block::User => self.users[offset].to_string(),
            Block::Item => self.items[offset].to_string(),
            Block::Po => format!("{}\t{}", self.po[offset].0, self.po[offset].1),
            Block::Sp => format!("{}\t{}", self.sp[offset].0, self.sp[offset].1),
            Block::Pr => PR_KEY.to_string(),
        };
        Some((block, key))
    }

    /// Line-oriented text form: a `# features:` header, then
    /// `<index>\t<block>\t<key>` per feature. Pair keys hold a tab between
    /// their two URIs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# features: {}", self.config);
        for index in 0..self.dim() {
            let (block, key) = self.key(index).expect("index within dim");
            let _ = writeln!(out, "{index}\t{}\t{key}", block.as_str());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<FeatureIndex> {
        let perr = |line: usize, message: String| Error::Parse { line, message };
        let mut config = None;
        let mut users = Vec::new();
        let mut items = Vec::new();
        let mut po = Vec::new();
        let mut sp = Vec::new();
        let mut pr = false;
        let mut expected = 0usize;
        let mut last_block = Block::User;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if let Some(rest) = line.strip_prefix("# features:") {
                config = Some(rest.trim().parse::<FeatureConfig>().map_err(|e| {
                    perr(line_no, format!("{e}"))
                })?);
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let (Some(idx), Some(block), Some(key)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(perr(line_no, "expected <index>\\t<block>\\t<key>".into()));
            };
            let idx: usize = idx
                .parse()
                .map_err(|_| perr(line_no, format!("bad index {idx:?}")))?;
            if idx != expected {
                return Err(perr(line_no, format!("expected index {expected}, found {idx}")));
            }
            expected += 1;
            let block = Block::parse(block)
                .ok_or_else(|| perr(line_no, format!("unknown block {block:?}")))?;
            if block < last_block {
                return Err(perr(line_no, format!("block {} out of order", block.as_str())));
            }
            last_block = block;
            let pair = |key: &str| -> Result<(String, String)> {
                key.split_once('\t')
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .ok_or_else(|| perr(line_no, "pair key needs two tab-separated URIs".into()))
            };
            let id = |key: &str| -> Result<u32> {
                key.parse()
                    .map_err(|_| perr(line_no, format!("bad id {key:?}")))
            };
            match block {
                Block::User => users.push(UserId(id(key)?)),
                Block::Item => items.push(ItemId(id(key)?)),
                Block::Po => po.push(pair(key)?),
                Block::Sp => sp.push(pair(key)?),
                Block::Pr => {
                    if pr || key != PR_KEY {
                        return Err(perr(line_no, "malformed PageRank column".into()));
                    }
                    pr = true;
                }
            }
        }
        let config = config.ok_or_else(|| perr(0, "missing `# features:` header".into()))?;
        let consistent = (config.po || po.is_empty())
            && (config.sp || sp.is_empty())
            && config.pr == pr
            && users.windows(2).all(|w| w[0] < w[1])
            && items.windows(2).all(|w| w[0] < w[1])
            && po.windows(2).all(|w| w[0] < w[1])
            && sp.windows(2).all(|w| w[0] < w[1]);
        if !consistent {
            return Err(perr(0, "blocks do not match the header or are unsorted".into()));
        }
        Ok(FeatureIndex {
            users,
            items,
            po,
            sp,
            config,
        })
    }
}

/// Knowledge entries of an item, without the user one-hot.
///
/// Pairs missing from the index are skipped.
pub fn item_features(
    item: ItemId,
    index: &FeatureIndex,
    knowledge: &ItemKnowledge,
) -> Result<SparseVector> {
    let item_idx = index.item_feature(item).ok_or(Error::UnknownItem(item))?;
    let config = index.config();
    let mut v = SparseVector::new();
    v.push_sorted(item_idx, 1.0);
    if config.po && !knowledge.po.is_empty() {
        let value = 1.0 / knowledge.po.len() as f64;
        let mut idx: Vec<usize> = knowledge
            .po
            .iter()
            .filter_map(|(p, o)| index.po_feature(p, o))
            .collect();
        idx.sort_unstable();
        for i in idx {
            v.push_sorted(i, value);
        }
    }
    if config.sp && !knowledge.sp.is_empty() {
        let value = 1.0 / knowledge.sp.len() as f64;
        let mut idx: Vec<usize> = knowledge
            .sp
            .iter()
            .filter_map(|(s, p)| index.sp_feature(s, p))
            .collect();
        idx.sort_unstable();
        for i in idx {
            v.push_sorted(i, value);
        }
    }
    if let (Some(i), Some(value)) = (index.pr_feature(), knowledge.pagerank) {
        v.push_sorted(i, value);
    }
    Ok(v)
}

/// The FM input for one `(user, item)` example.
pub fn assemble_example(
    user: UserId,
    item: ItemId,
    index: &FeatureIndex,
    knowledge: &ItemKnowledge,
) -> Result<SparseVector> {
    let user_idx = index.user_feature(user).ok_or(Error::UnknownUser(user))?;
    let mut head = SparseVector::new();
    head.push_sorted(user_idx, 1.0);
    head.concat(&item_features(item, index, knowledge)?)
}
