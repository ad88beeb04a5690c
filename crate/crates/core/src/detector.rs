//! Semi-supervised detector: a convex blend of the Isolation Forest prior and
//! a distance-weighted vote of the k nearest labeled training examples.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_query, LabeledDataset};
use crate::error::{Error, Result};
use crate::iforest::{fit_iforest_with, IsolationForestConfig, IsolationForestModel};
use crate::scalar::{euclidean, Scalar};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub k: usize,
    /// Weight of the label vote; `0` reduces the detector to the prior.
    pub blend_weight: f64,
    /// Distance floor in the vote weights `1 / (d + epsilon)`.
    pub epsilon: f64,
    pub forest: IsolationForestConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { k: 10, blend_weight: 0.5, epsilon: 1e-12, forest: IsolationForestConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct DetectorModel<T> {
    prior: IsolationForestModel<T>,
    features: Array2<T>,
    labels: Vec<u8>,
    k: usize,
    blend_weight: f64,
    epsilon: f64,
}

pub fn fit_detector<T: Scalar>(train: &LabeledDataset<T>, config: &DetectorConfig, seed: u64) -> Result<DetectorModel<T>> {
    if config.k == 0 {
        return Err(Error::invalid("detector k must be at least 1"));
    }
    if !(0.0..=1.0).contains(&config.blend_weight) {
        return Err(Error::invalid(format!("blend weight {} outside [0, 1]", config.blend_weight)));
    }
    if config.epsilon.is_nan() || config.epsilon <= 0.0 {
        return Err(Error::invalid("detector epsilon must be positive"));
    }
    let k = if config.k > train.n() {
        log::warn!("detector k = {} exceeds {} labeled examples; clamping", config.k, train.n());
        train.n()
    } else {
        config.k
    };
    let prior = fit_iforest_with(train, &config.forest, seeding::stream(seed, "detector-prior"))?;
    Ok(DetectorModel {
        prior,
        features: train.features().to_owned(),
        labels: train.labels().to_vec(),
        k,
        blend_weight: config.blend_weight,
        epsilon: config.epsilon,
    })
}

impl<T: Scalar> DetectorModel<T> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blend_weight(&self) -> f64 {
        self.blend_weight
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn prior(&self) -> &IsolationForestModel<T> {
        &self.prior
    }

    /// Copy of the model with a different blend weight; the fitted prior and
    /// labeled index are shared state.
    pub fn with_blend_weight(&self, blend_weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&blend_weight) {
            return Err(Error::invalid(format!("blend weight {blend_weight} outside [0, 1]")));
        }
        Ok(DetectorModel { blend_weight, ..self.clone() })
    }

    /// Distance-weighted fraction of anomalies among the k nearest labeled
    /// examples.
    pub fn label_vote(&self, x: &[T]) -> Result<f64> {
        check_query(x, self.d())?;
        Ok(self.vote_unchecked(x))
    }

    fn vote_unchecked(&self, x: &[T]) -> f64 {
        let rows = self.features.as_slice().expect("standard layout");
        let d = self.d();
        let mut dist: Vec<(f64, usize)> = (0..self.labels.len())
            .map(|i| (euclidean(x, &rows[i * d..(i + 1) * d]).to_f64_lossy(), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, order);
            dist.truncate(self.k);
        }
        let (mut weighted, mut total) = (0.0, 0.0);
        for &(di, i) in &dist {
            let w = 1.0 / (di + self.epsilon);
            total += w;
            if self.labels[i] == 1 {
                weighted += w;
            }
        }
        weighted / total
    }

    /// `f(x) = (1 - w) * prior(x) + w * vote(x)`, in `[0, 1]`.
    pub fn score(&self, x: &[T]) -> Result<T> {
        check_query(x, self.d())?;
        Ok(T::lit(self.score_unchecked(x)))
    }

    fn score_unchecked(&self, x: &[T]) -> f64 {
        let w = self.blend_weight;
        let prior = self.prior.score_unchecked(x);
        if w == 0.0 {
            return prior;
        }
        ((1.0 - w) * prior + w * self.vote_unchecked(x)).clamp(0.0, 1.0)
    }

    /// Scores every row of `rows`, in order.
    pub fn score_rows(&self, rows: ArrayView2<'_, T>) -> Result<Vec<T>> {
        if rows.ncols() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: rows.ncols() });
        }
        let rows = rows.as_standard_layout();
        let d = self.d();
        let flat = rows.as_slice().expect("standard layout");
        (0..rows.nrows())
            .into_par_iter()
            .map(|i| self.score(&flat[i * d..(i + 1) * d]))
            .collect()
    }
}

pub fn detector_score<T: Scalar>(model: &DetectorModel<T>, x: &[T]) -> Result<T> {
    model.score(x)
}
