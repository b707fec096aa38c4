//! Compares a real-data comparison run with the published reference numbers.

use crate::report::ExperimentReport;

/// Published per-model means, keyed by model id.
pub const REFERENCE: [(&str, [(&str, f64); 11]); 4] = [
    ("poprank", [("MRR", 0.4080), ("MAP", 0.1115), ("nDCG@1", 0.2459), ("P@1", 0.2459), ("R@1", 0.0064), ("nDCG@5", 0.2809), ("P@5", 0.2240), ("R@5", 0.0305), ("nDCG@10", 0.3664), ("P@10", 0.2104), ("R@10", 0.0580)]),
    ("knn", [("MRR", 0.5756), ("MAP", 0.2037), ("nDCG@1", 0.4086), ("P@1", 0.4086), ("R@1", 0.0132), ("nDCG@5", 0.4049), ("P@5", 0.3538), ("R@5", 0.0553), ("nDCG@10", 0.4753), ("P@10", 0.3179), ("R@10", 0.0978)]),
    ("bprmf", [("MRR", 0.5906), ("MAP", 0.2018), ("nDCG@1", 0.4269), ("P@1", 0.4269), ("R@1", 0.0258), ("nDCG@5", 0.4176), ("P@5", 0.3393), ("R@5", 0.0977), ("nDCG@10", 0.5000), ("P@10", 0.2883), ("R@10", 0.1602)]),
    ("lodfm", [("MRR", 0.6218), ("MAP", 0.2318), ("nDCG@1", 0.4685), ("P@1", 0.4685), ("R@1", 0.0268), ("nDCG@5", 0.4537), ("P@5", 0.3829), ("R@5", 0.1052), ("nDCG@10", 0.5231), ("P@10", 0.3256), ("R@10", 0.1730)]),
];

pub fn reference(model: &str, metric: &str) -> Option<f64> {
    REFERENCE
        .iter()
        .find(|(id, _)| *id == model)?
        .1
        .iter()
        .find(|(m, _)| *m == metric)
        .map(|&(_, v)| v)
}

/// Whether LODFM matches or beats BPRMF on the headline metrics, plus every
/// measured-minus-reference delta. Informational only.
pub fn replication_notes(report: &ExperimentReport) -> Vec<String> {
    let mut notes = Vec::new();
    let find = |id: &str| report.models.iter().find(|m| m.id == id);
    if let (Some(fm), Some(mf)) = (find("lodfm"), find("bprmf")) {
        for metric in ["MRR", "MAP", "nDCG@10"] {
            if let (Some(a), Some(b)) = (fm.metric(metric), mf.metric(metric)) {
                let verdict = if a >= b { "holds" } else { "does not hold" };
                notes.push(format!("LODFM >= BPRMF on {metric}: {verdict} ({a:.4} vs {b:.4})"));
            }
        }
    }
    for model in &report.models {
        for m in &model.metrics {
            if let Some(r) = reference(&model.id, &m.name) {
                notes.push(format!("{} {}: {:.4} (reference {r:.4}, delta {:+.4})", model.model, m.name, m.value, m.value - r));
            }
        }
    }
    notes
}
