//! Result files: `report.json`, the aligned `report.txt` table, and per-run
//! snapshots written as each model finishes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use lodfm_core::eval::{CandidateSet, SIGNIFICANCE_LEVEL};
use lodfm_core::experiment::{ModelRun, SignificanceEntry};
use lodfm_core::DatasetStats;
use serde::{Deserialize, Serialize};

pub const SPLIT_PROTOCOL: &str =
    "per-user stratified 80/20 random split; users with fewer than 5 interactions stay in train";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub stopped_epoch: Option<usize>,
    pub early_stop_triggered: bool,
    pub epochs_run: usize,
    pub validation_losses: Vec<f64>,
    pub final_training_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub id: String,
    pub metrics: Vec<MetricValue>,
    pub training_auc: Option<f64>,
    pub training: Option<TrainingSummary>,
}

impl ModelSummary {
    pub fn from_run(run: &ModelRun) -> Self {
        Self {
            model: run.report.model.clone(),
            id: run.spec.id().to_string(),
            metrics: run
                .report
                .metrics
                .iter()
                .map(|m| MetricValue {
                    name: m.name.clone(),
                    value: m.mean,
                })
                .collect(),
            training_auc: run.training_auc,
            training: run.train.as_ref().map(|t| TrainingSummary {
                stopped_epoch: t.stopped_epoch,
                early_stop_triggered: t.early_stop_triggered,
                epochs_run: t.epochs_run,
                validation_losses: t.validation_losses.clone(),
                final_training_loss: t.final_training_loss,
            }),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config_fingerprint: String,
    pub cache_fingerprint: String,
    pub split_seed: u64,
    pub split_protocol: String,
    pub candidates: CandidateSet,
    pub cutoffs: Vec<usize>,
    pub dataset: DatasetStats,
    pub users_evaluated: usize,
    pub models: Vec<ModelSummary>,
    pub significance_level: f64,
    pub resamples: usize,
    pub significance: Vec<SignificanceEntry>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(kind: &str, runs: &[ModelRun], significance: Vec<SignificanceEntry>, ctx: ReportContext) -> Self {
        Self {
            kind: kind.into(),
            config_fingerprint: ctx.config_fingerprint,
            cache_fingerprint: ctx.cache_fingerprint,
            split_seed: ctx.split_seed,
            split_protocol: SPLIT_PROTOCOL.into(),
            candidates: ctx.candidates,
            cutoffs: ctx.cutoffs,
            dataset: ctx.dataset,
            users_evaluated: runs.first().map_or(0, |r| r.report.users.len()),
            models: runs.iter().map(ModelSummary::from_run).collect(),
            significance_level: SIGNIFICANCE_LEVEL,
            resamples: ctx.resamples,
            significance,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn p_value(&self, model: &str, metric: &str) -> Option<&SignificanceEntry> {
        self.significance
            .iter()
            .find(|e| e.model == model && e.metric == metric)
    }

    /// Metrics as rows, models as columns; `*` marks p below the level.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Metric".to_string()];
        header.extend(self.models.iter().map(|m| m.model.clone()));
        let names: Vec<String> = self
            .models
            .first()
            .map(|m| m.metrics.iter().map(|v| v.name.clone()).collect())
            .unwrap_or_default();
        let mut rows = vec![header];
        for name in &names {
            let mut row = vec![name.clone()];
            for m in &self.models {
                let v = m.metric(name).map_or("-".to_string(), |v| format!("{v:.4}"));
                let mark = match self.p_value(&m.model, name) {
                    Some(e) if !e.degenerate && e.p_value < self.significance_level => "*",
                    _ => "",
                };
                row.push(format!("{v}{mark}"));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (k, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if k == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        if let Some(base) = self.significance.first().map(|e| e.baseline.clone()) {
            let _ = writeln!(
                out,
                "\n* p < {} against {base} (bootstrapped paired t-test, {} resamples)",
                self.significance_level, self.resamples
            );
        }
        let _ = writeln!(out, "\nusers evaluated: {}", self.users_evaluated);
        let _ = writeln!(out, "candidates: {}", match self.candidates {
            CandidateSet::All => "all items without a training interaction",
            CandidateSet::TestOnly => "the user's test items",
        });
        let _ = writeln!(out, "split: {} (seed {})", self.split_protocol, self.split_seed);
        let _ = writeln!(out, "config sha256: {}", self.config_fingerprint);
        let _ = writeln!(out, "features sha256: {}", self.cache_fingerprint);
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("report.txt"), self.to_table())?;
        Ok(())
    }
}

/// Run-independent facts every report embeds.
#[derive(Debug, Clone)]
pub struct ReportContext {
    pub config_fingerprint: String,
    pub cache_fingerprint: String,
    pub split_seed: u64,
    pub candidates: CandidateSet,
    pub cutoffs: Vec<usize>,
    pub dataset: DatasetStats,
    pub resamples: usize,
}

/// Saves one finished run under `dir/runs/` so an aborted line-up keeps it.
pub fn persist_run(dir: &Path, position: usize, run: &ModelRun) -> anyhow::Result<()> {
    let runs = dir.join("runs");
    std::fs::create_dir_all(&runs)?;
    let name = format!("{position:02}-{}.json", run.spec.id());
    let mut text = serde_json::to_string_pretty(run)?;
    text.push('\n');
    std::fs::write(runs.join(name), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(model: &str, mrr: f64) -> ModelSummary {
        ModelSummary {
            model: model.into(),
            id: model.to_lowercase(),
            metrics: vec![MetricValue { name: "MRR".into(), value: mrr }],
            training_auc: None,
            training: None,
        }
    }

    #[test]
    fn table_layout_and_marks() {
        let report = ExperimentReport {
            kind: "comparison".into(),
            config_fingerprint: "abc".into(),
            cache_fingerprint: "def".into(),
            split_seed: 1,
            split_protocol: SPLIT_PROTOCOL.into(),
            candidates: CandidateSet::All,
            cutoffs: vec![1],
            dataset: DatasetStats::from_counts(2, 2, 3, 2),
            users_evaluated: 2,
            models: vec![summary("BPRMF", 0.5906), summary("LODFM", 0.6218)],
            significance_level: SIGNIFICANCE_LEVEL,
            resamples: 10_000,
            significance: vec![SignificanceEntry {
                model: "LODFM".into(),
                baseline: "BPRMF".into(),
                metric: "MRR".into(),
                p_value: 0.001,
                t_statistic: 3.0,
                degenerate: false,
            }],
            notes: vec![],
        };
        let table = report.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "Metric   BPRMF    LODFM");
        assert_eq!(lines[2], "MRR     0.5906  0.6218*");
        assert!(table.contains("config sha256: abc"));
        let back: ExperimentReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
