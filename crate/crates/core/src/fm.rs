//! Second-order factorization machine.
//!
//! `ŷ(x) = w0 + Σ w_i x_i + Σ_{i<j} <v_i, v_j> x_i x_j`, evaluated in
//! `O(nnz · m)` through `½ Σ_f [(Σ_i v_if x_i)² − Σ_i v_if² x_i²]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmModel {
    num_features: usize,
    num_factors: usize,
    bias: f64,
    linear: Vec<f64>,
    /// Row-major `num_features × num_factors`.
    factors: Vec<f64>,
}

impl FmModel {
    pub fn zeros(num_features: usize, num_factors: usize) -> Self {
        Self {
            num_features,
            num_factors,
            bias: 0.0,
            linear: vec![0.0; num_features],
            factors: vec![0.0; num_features * num_factors],
        }
    }

    /// `w0 = 0`, `w = 0`, `V ~ N(0, init_stddev²)` drawn from the seed's init stream.
    pub fn init(num_features: usize, num_factors: usize, init_stddev: f64, seed: u64) -> Result<Self> {
        let invalid = || Error::InvalidArgument(format!("init_stddev must be positive, got {init_stddev}"));
        if !(init_stddev > 0.0) {
            return Err(invalid());
        }
        let normal = Normal::new(0.0, init_stddev).map_err(|_| invalid())?;
        let mut rng = rng::stream(seed, rng::STREAM_INIT);
        let mut model = Self::zeros(num_features, num_factors);
        for v in &mut model.factors {
            *v = normal.sample(&mut rng);
        }
        Ok(model)
    }

    pub fn from_parts(
        bias: f64,
        linear: Vec<f64>,
        factors: Vec<f64>,
        num_factors: usize,
    ) -> Result<Self> {
        let num_features = linear.len();
        if factors.len() != num_features * num_factors {
            return Err(Error::LengthMismatch {
                left: factors.len(),
                right: num_features * num_factors,
            });
        }
        let finite = bias.is_finite()
            && linear.iter().all(|v| v.is_finite())
            && factors.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite FM parameter".into()));
        }
        Ok(Self {
            num_features,
            num_factors,
            bias,
            linear,
            factors,
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_factors(&self) -> usize {
        self.num_factors
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn factor(&self, feature: usize) -> &[f64] {
        let m = self.num_factors;
        &self.factors[feature * m..(feature + 1) * m]
    }

    pub fn bias_mut(&mut self) -> &mut f64 {
        &mut self.bias
    }

    pub fn linear_mut(&mut self) -> &mut [f64] {
        &mut self.linear
    }

    pub fn factors_mut(&mut self) -> &mut [f64] {
        &mut self.factors
    }

    pub fn factor_mut(&mut self, feature: usize) -> &mut [f64] {
        let m = self.num_factors;
        &mut self.factors[feature * m..(feature + 1) * m]
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite()
            && self.linear.iter().all(|v| v.is_finite())
            && self.factors.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check(&self, x: &SparseVector) -> Result<()> {
        match x.max_index() {
            Some(i) if i >= self.num_features => Err(Error::Dimension {
                index: i,
                dim: self.num_features,
            }),
            _ => Ok(()),
        }
    }

    /// `q_f = Σ_i v_if x_i` for every factor `f`.
    pub(crate) fn factor_sums(&self, x: &SparseVector, out: &mut [f64]) {
        out.iter_mut().for_each(|q| *q = 0.0);
        for (i, xi) in x.iter() {
            for (q, v) in out.iter_mut().zip(self.factor(i)) {
                *q += v * xi;
            }
        }
    }

    pub(crate) fn predict_unchecked(&self, x: &SparseVector) -> f64 {
        let mut y = self.bias;
        for (i, xi) in x.iter() {
            y += self.linear[i] * xi;
        }
        let m = self.num_factors;
        let mut pairwise = 0.0;
        for f in 0..m {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for (i, xi) in x.iter() {
                let t = self.factors[i * m + f] * xi;
                sum += t;
                sum_sq += t * t;
            }
            pairwise += sum * sum - sum_sq;
        }
        y + 0.5 * pairwise
    }

    /// Linear-time prediction.
    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        self.check(x)?;
        Ok(self.predict_unchecked(x))
    }

    /// The literal double sum over feature pairs. Quadratic in `nnz`; kept as
    /// a reference for [`FmModel::predict`].
    pub fn predict_naive(&self, x: &SparseVector) -> Result<f64> {
        self.check(x)?;
        let entries = x.entries();
        let mut y = self.bias;
        for &(i, xi) in entries {
            y += self.linear[i] * xi;
        }
        for (a, &(i, xi)) in entries.iter().enumerate() {
            for &(j, xj) in &entries[a + 1..] {
                let dot: f64 = self
                    .factor(i)
                    .iter()
                    .zip(self.factor(j))
                    .map(|(p, q)| p * q)
                    .sum();
                y += dot * xi * xj;
            }
        }
        Ok(y)
    }

    /// Partial derivatives of `ŷ(x)` with respect to every parameter tied to
    /// a nonzero feature of `x`. All other partials are zero.
    pub fn gradient(&self, x: &SparseVector) -> Result<FmGradient> {
        self.check(x)?;
        let m = self.num_factors;
        let mut sums = vec![0.0; m];
        self.factor_sums(x, &mut sums);
        let mut grad = FmGradient {
            bias: 1.0,
            num_factors: m,
            indices: Vec::with_capacity(x.nnz()),
            linear: Vec::with_capacity(x.nnz()),
            factors: Vec::with_capacity(x.nnz() * m),
        };
        for (i, xi) in x.iter() {
            grad.indices.push(i);
            grad.linear.push(xi);
            for (q, v) in sums.iter().zip(self.factor(i)) {
                grad.factors.push(xi * q - v * xi * xi);
            }
        }
        Ok(grad)
    }
}

/// Sparse gradient of a prediction: entries for the features present in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FmGradient {
    pub bias: f64,
    pub num_factors: usize,
    pub indices: Vec<usize>,
    pub linear: Vec<f64>,
    /// `indices.len() × num_factors`, row per listed feature.
    pub factors: Vec<f64>,
}

impl FmGradient {
    pub fn factor(&self, k: usize) -> &[f64] {
        &self.factors[k * self.num_factors..(k + 1) * self.num_factors]
    }

    /// `∂ŷ/∂w_i`, zero for features not in the input.
    pub fn linear_at(&self, feature: usize) -> f64 {
        self.indices
            .binary_search(&feature)
            .map_or(0.0, |k| self.linear[k])
    }

    /// `∂ŷ/∂v_{i,f}`, zero for features not in the input.
    pub fn factor_at(&self, feature: usize, f: usize) -> f64 {
        self.indices
            .binary_search(&feature)
            .map_or(0.0, |k| self.factor(k)[f])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sv(entries: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_entries(entries.to_vec()).unwrap()
    }

    #[test]
    fn zero_model_predicts_zero() {
        let model = FmModel::zeros(5, 3);
        let x = sv(&[(0, 1.0), (2, 0.5), (4, -2.0)]);
        assert_eq!(model.predict(&x).unwrap(), 0.0);
        assert_eq!(model.predict_naive(&x).unwrap(), 0.0);
    }

    #[test]
    fn hand_example() {
        // 0.1 + 0.2 + 0.3 + <(1,0),(0.5,0.5)> = 1.1
        let model =
            FmModel::from_parts(0.1, vec![0.2, 0.3], vec![1.0, 0.0, 0.5, 0.5], 2).unwrap();
        let x = sv(&[(0, 1.0), (1, 1.0)]);
        assert!((model.predict(&x).unwrap() - 1.1).abs() < 1e-15);
        assert!((model.predict_naive(&x).unwrap() - 1.1).abs() < 1e-15);
    }

    #[test]
    fn single_feature_has_no_pairwise_term() {
        let model = FmModel::init(4, 3, 1.0, 7).unwrap();
        let mut model = model;
        model.linear_mut()[2] = 0.7;
        *model.bias_mut() = -0.25;
        let x = sv(&[(2, 3.0)]);
        assert!((model.predict(&x).unwrap() - (-0.25 + 2.1)).abs() < 1e-12);
        assert_eq!(model.predict_naive(&x).unwrap(), -0.25 + 0.7 * 3.0);
    }

    #[test]
    fn dimension_errors() {
        let model = FmModel::zeros(3, 2);
        let x = sv(&[(3, 1.0)]);
        assert_eq!(model.predict(&x), Err(Error::Dimension { index: 3, dim: 3 }));
        assert!(model.predict_naive(&x).is_err());
        assert!(model.gradient(&x).is_err());
    }

    #[test]
    fn one_hot_gradient() {
        let model = FmModel::init(4, 3, 0.5, 1).unwrap();
        let g = model.gradient(&sv(&[(1, 1.0)])).unwrap();
        assert_eq!(g.bias, 1.0);
        assert_eq!(g.linear_at(1), 1.0);
        assert_eq!(g.linear_at(0), 0.0);
        for f in 0..3 {
            assert!(g.factor_at(1, f).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_factors_zero_factor_gradient() {
        let model = FmModel::zeros(6, 4);
        let g = model.gradient(&sv(&[(0, 1.0), (3, 0.25), (5, 2.0)])).unwrap();
        assert!(g.factors.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_and_from_parts_validation() {
        assert!(FmModel::init(3, 2, 0.0, 1).is_err());
        assert!(FmModel::from_parts(0.0, vec![0.0; 2], vec![0.0; 3], 2).is_err());
        assert!(FmModel::from_parts(f64::NAN, vec![0.0; 2], vec![0.0; 4], 2).is_err());
        let a = FmModel::init(10, 4, 0.01, 3).unwrap();
        let b = FmModel::init(10, 4, 0.01, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bias(), 0.0);
        assert!(a.linear().iter().all(|&w| w == 0.0));
    }
}
