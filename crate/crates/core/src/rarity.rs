//! k-NN sphere rarity score, Bayesian selection of the neighbor count, and
//! the rarity-based density estimate.
//!
//! Every training point `x_i` owns a sphere of radius `NN_k(x_i)`, the
//! distance to its k-th nearest training neighbor. The rarity of a query is
//! the smallest radius among spheres containing it, or zero when no sphere
//! does.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::dataset::{check_query, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::{euclidean, Scalar};

/// Upper bound on the radius table width when `k_max` is not given.
pub const DEFAULT_K_MAX_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RarityConfig {
    /// Widest neighbor count kept in the radius table; `None` means
    /// `min(n - 1, 512)`. Larger counts are computed on demand.
    pub k_max: Option<usize>,
    /// Floor applied to radii so that duplicated rows keep positive radius.
    pub epsilon: f64,
}

impl Default for RarityConfig {
    fn default() -> Self {
        RarityConfig { k_max: None, epsilon: 1e-12 }
    }
}

/// Outcome of the neighbor-count selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KHatEstimate {
    pub k_hat: usize,
    /// Smallest leave-one-out k reaching each anomaly.
    pub min_ks: Vec<usize>,
    pub posterior_alpha: f64,
    pub posterior_beta: f64,
    /// 95th percentile of the posterior on the normalized scale.
    pub quantile: f64,
}

#[derive(Debug, Clone)]
pub struct RarityModel<T> {
    features: Array2<T>,
    k_max: usize,
    /// Row-major `n x k_max`; entry `(i, k - 1)` is `NN_k(x_i)`.
    radii: Vec<T>,
    epsilon: T,
    k_hat: usize,
    k_hat_radii: Vec<T>,
    train_inverse_rarity_sum: f64,
}

/// `p`-quantile of `Beta(alpha, beta)` by bisection on the regularized
/// incomplete beta function, to absolute tolerance `1e-9`.
pub fn beta_quantile(alpha: f64, beta: f64, p: f64) -> f64 {
    assert!(alpha > 0.0 && beta > 0.0 && (0.0..=1.0).contains(&p));
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(alpha, beta, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Posterior update over the normalized neighbor count and its 95th
/// percentile mapped back to an integer in `1..=n-1`.
pub fn select_k_hat(min_ks: &[usize], n: usize) -> KHatEstimate {
    assert!(n >= 2, "rarity needs at least two training points");
    let span = (n - 1) as f64;
    let evidence: f64 = min_ks.iter().map(|&k| (k as f64 - 1.0) / span).sum();
    let alpha = 1.0 + evidence;
    let beta = 1.0 + min_ks.len() as f64 - evidence;
    let quantile = beta_quantile(alpha, beta, 0.95);
    let k_hat = (quantile * span + 1.0).round().clamp(1.0, span) as usize;
    KHatEstimate { k_hat, min_ks: min_ks.to_vec(), posterior_alpha: alpha, posterior_beta: beta, quantile }
}

impl<T: Scalar> RarityModel<T> {
    /// Builds the radius table over `train` and selects `k_hat` from its
    /// anomalies.
    pub fn fit(train: &LabeledDataset<T>, config: &RarityConfig) -> Result<Self> {
        let mut model = Self::fit_features(train.features(), config)?;
        let estimate = model.estimate_k_hat(&train.anomaly_indices())?;
        model.set_k_hat(estimate.k_hat)?;
        Ok(model)
    }

    /// Builds the radius table only; `k_hat` starts at 1 until
    /// [`set_k_hat`](Self::set_k_hat) is called.
    pub fn fit_features(features: ArrayView2<'_, T>, config: &RarityConfig) -> Result<Self> {
        let n = features.nrows();
        if n < 2 {
            return Err(Error::InsufficientData("rarity needs at least two training points".into()));
        }
        crate::dataset::check_finite(features)?;
        if config.epsilon.is_nan() || config.epsilon <= 0.0 {
            return Err(Error::invalid("rarity epsilon must be positive"));
        }
        let k_max = config.k_max.unwrap_or(DEFAULT_K_MAX_CAP).clamp(1, n - 1);
        let features = features.as_standard_layout().into_owned();
        let epsilon = T::lit(config.epsilon);
        let d = features.ncols();
        let flat = features.as_slice().expect("standard layout");
        let radii: Vec<T> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let xi = &flat[i * d..(i + 1) * d];
                let mut dist: Vec<T> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| euclidean(xi, &flat[j * d..(j + 1) * d]))
                    .collect();
                dist.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                dist.truncate(k_max);
                dist.into_iter().map(move |r| r.max(epsilon))
            })
            .collect();
        let mut model = RarityModel {
            features,
            k_max,
            radii,
            epsilon,
            k_hat: 1,
            k_hat_radii: Vec::new(),
            train_inverse_rarity_sum: 0.0,
        };
        model.set_k_hat(1)?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn k_hat(&self) -> usize {
        self.k_hat
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn train_inverse_rarity_sum(&self) -> f64 {
        self.train_inverse_rarity_sum
    }

    fn row(&self, i: usize) -> &[T] {
        let d = self.d();
        &self.features.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k >= self.n() {
            return Err(Error::invalid(format!("k = {k} outside 1..={}", self.n() - 1)));
        }
        Ok(())
    }

    /// `NN_k(x_i)` for every training point.
    pub fn radii_at(&self, k: usize) -> Result<Vec<T>> {
        self.check_k(k)?;
        if k <= self.k_max {
            return Ok((0..self.n()).map(|i| self.radii[i * self.k_max + k - 1]).collect());
        }
        let n = self.n();
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let xi = self.row(i);
                let mut dist: Vec<T> = (0..n).filter(|&j| j != i).map(|j| euclidean(xi, self.row(j))).collect();
                let (_, kth, _) =
                    dist.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
                kth.max(self.epsilon)
            })
            .collect())
    }

    /// Fixes the neighbor count used by [`density`](Self::density) and
    /// refreshes the cached training normalizer.
    pub fn set_k_hat(&mut self, k: usize) -> Result<()> {
        let radii = self.radii_at(k)?;
        let sum: f64 = (0..self.n())
            .into_par_iter()
            .map(|i| {
                let r = min_containing_radius(self.row(i), &self.features, &radii);
                1.0 / r.max(self.epsilon).to_f64_lossy()
            })
            .sum();
        debug_assert!(sum.is_finite() && sum > 0.0);
        self.k_hat = k;
        self.k_hat_radii = radii;
        self.train_inverse_rarity_sum = sum;
        Ok(())
    }

    pub fn rarity_score(&self, x: &[T], k: usize) -> Result<T> {
        check_query(x, self.d())?;
        if k == self.k_hat {
            return Ok(min_containing_radius(x, &self.features, &self.k_hat_radii));
        }
        let radii = self.radii_at(k)?;
        Ok(min_containing_radius(x, &self.features, &radii))
    }

    /// Rarity at the selected `k_hat`.
    pub fn rarity(&self, x: &[T]) -> Result<T> {
        self.rarity_score(x, self.k_hat)
    }

    /// `(1/r) / (1/r + sum_i 1/r(x_i))`, or zero when `r(x) = 0`.
    pub fn density(&self, x: &[T]) -> Result<T> {
        let r = self.rarity(x)?;
        if r == T::zero() {
            return Ok(T::zero());
        }
        Ok(T::lit(density_from_rarity(r.max(self.epsilon).to_f64_lossy(), self.train_inverse_rarity_sum)))
    }

    /// Smallest k for which some training sphere, built without `held_out`,
    /// contains `held_out`. Capped at `n - 1`.
    pub fn leave_one_out_min_k(&self, held_out: usize) -> usize {
        let n = self.n();
        assert!(held_out < n);
        let xa = self.row(held_out);
        // In the reduced set each point has n - 2 neighbors.
        let unreachable = n - 1;
        let mut best = unreachable;
        let mut by_distance: Vec<(T, usize)> =
            (0..n).filter(|&i| i != held_out).map(|i| (euclidean(self.row(i), xa), i)).collect();
        by_distance.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
        for &(dia, i) in &by_distance {
            let xi = self.row(i);
            // k = 1 + #{j not in {i, held_out}: d(i, j) < d(i, held_out)}
            let mut closer = 0;
            for j in 0..n {
                if j == i || j == held_out {
                    continue;
                }
                if euclidean(xi, self.row(j)) < dia {
                    closer += 1;
                    if closer + 1 >= best {
                        break;
                    }
                }
            }
            let k = closer + 1;
            if k <= n - 2 && k < best {
                best = k;
                if best == 1 {
                    break;
                }
            }
        }
        best
    }

    /// Neighbor count selection from the training anomalies at `anomalies`
    /// (row indices into the training features).
    pub fn estimate_k_hat(&self, anomalies: &[usize]) -> Result<KHatEstimate> {
        if let Some(&bad) = anomalies.iter().find(|&&a| a >= self.n()) {
            return Err(Error::invalid(format!("anomaly index {bad} out of range")));
        }
        let min_ks: Vec<usize> = anomalies.par_iter().map(|&a| self.leave_one_out_min_k(a)).collect();
        Ok(select_k_hat(&min_ks, self.n()))
    }
}

/// Density of a query with positive rarity `r` given the training sum of
/// inverse rarities.
pub fn density_from_rarity(r: f64, train_inverse_sum: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let inv = 1.0 / r;
    inv / (inv + train_inverse_sum)
}

fn min_containing_radius<T: Scalar>(x: &[T], features: &Array2<T>, radii: &[T]) -> T {
    let d = features.ncols();
    let flat = features.as_slice().expect("standard layout");
    let mut best: Option<T> = None;
    for (i, &r) in radii.iter().enumerate() {
        if best.is_some_and(|b| r >= b) {
            continue;
        }
        if euclidean(&flat[i * d..(i + 1) * d], x) <= r {
            best = Some(r);
        }
    }
    best.unwrap_or_else(T::zero)
}

pub fn rarity_score<T: Scalar>(model: &RarityModel<T>, x: &[T], k: usize) -> Result<T> {
    model.rarity_score(x, k)
}

pub fn estimate_k_hat<T: Scalar>(model: &RarityModel<T>, train_anomalies: &[usize]) -> Result<usize> {
    Ok(model.estimate_k_hat(train_anomalies)?.k_hat)
}

pub fn density<T: Scalar>(model: &RarityModel<T>, x: &[T]) -> Result<T> {
    model.density(x)
}
