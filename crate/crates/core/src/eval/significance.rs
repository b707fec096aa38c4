use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;
const MIN_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestOutcome {
    pub p_value: f64,
    pub t_statistic: f64,
    /// Set when the observed differences have zero variance; `p_value` is then 1.
    pub degenerate: bool,
}

impl TTestOutcome {
    pub fn significant(&self, level: f64) -> bool {
        !self.degenerate && self.p_value < level
    }
}

fn t_statistic(d: &[f64]) -> Option<f64> {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let sd = math::sqrt(var);
    if sd == 0.0 {
        return None;
    }
    Some(mean / (sd / math::sqrt(n)))
}

/// Two-sided paired t-test with a bootstrap null distribution.
///
/// Differences `a - b` are centered on zero and resampled with replacement;
/// the p-value is the share of resampled `|t*|` at least the observed `|t|`.
pub fn bootstrap_paired_ttest(
    a: &[f64],
    b: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<TTestOutcome> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("paired test needs at least 2 pairs".into()));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidArgument("at least 1000 resamples required".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("metric values must be finite".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let Some(t) = t_statistic(&d) else {
        return Ok(TTestOutcome {
            p_value: 1.0,
            t_statistic: 0.0,
            degenerate: true,
        });
    };
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let centered: Vec<f64> = d.iter().map(|x| x - mean).collect();
    let mut rng = rng::stream(seed, rng::STREAM_BOOTSTRAP);
    let mut sample = alloc::vec![0.0; d.len()];
    let mut extreme = 0usize;
    for _ in 0..resamples {
        for s in sample.iter_mut() {
            *s = centered[rng.random_range(0..centered.len())];
        }
        let t_star = match t_statistic(&sample) {
            Some(v) => v,
            None if sample[0] == 0.0 => 0.0,
            None => f64::INFINITY,
        };
        if math::abs(t_star) >= math::abs(t) {
            extreme += 1;
        }
    }
    Ok(TTestOutcome {
        p_value: extreme as f64 / resamples as f64,
        t_statistic: t,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, scale: f64, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 99);
        (0..n).map(|_| scale * (r.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let a = noise(50, 1.0, 1);
        let out = bootstrap_paired_ttest(&a, &a, 1000, 3).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn shifted_samples_are_significant() {
        let b = noise(100, 1.0, 2);
        let a: Vec<f64> = b.iter().zip(noise(100, 1.0, 3)).map(|(x, e)| x + 10.0 + e).collect();
        let out = bootstrap_paired_ttest(&a, &b, DEFAULT_RESAMPLES, 7).unwrap();
        assert!(out.p_value < SIGNIFICANCE_LEVEL);
    }

    #[test]
    fn no_effect_is_not_significant() {
        let a = noise(100, 1.0, 4);
        let b = noise(100, 1.0, 5);
        let out = bootstrap_paired_ttest(&a, &b, 2000, 7).unwrap();
        assert!(out.p_value > 0.05, "p = {}", out.p_value);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(bootstrap_paired_ttest(&[1.0, 2.0], &[1.0], 1000, 0).is_err());
        assert!(bootstrap_paired_ttest(&[1.0], &[1.0], 1000, 0).is_err());
        assert!(bootstrap_paired_ttest(&[1.0, 2.0], &[0.0, 0.5], 999, 0).is_err());
    }
}
