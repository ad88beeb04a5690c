//! Squashing of detector scores into conditional anomaly probabilities.
//!
//! `P(Y=1 | x) = 1 - 2^(-(f(x)/lambda)^2)`, with `lambda` placed so that the
//! number of training examples mapped above 0.5 equals the number of
//! training anomalies.

use crate::dataset::LabeledDataset;
use crate::detector::{fit_detector, DetectorConfig, DetectorModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative margin above the largest score when no anomaly is labeled.
const EMPTY_MARGIN: f64 = 1e-6;
/// Threshold used when every score is zero.
const FALLBACK_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold<T> {
    pub lambda: T,
    /// Training scores whose probability exceeds 0.5 under `lambda`.
    pub exceeding: usize,
}

/// `1 - 2^(-(score/lambda)^2)`.
#[inline]
pub fn squash<T: Scalar>(score: T, lambda: T) -> T {
    let ratio = score / lambda;
    T::one() - T::lit(2.0).powf(-(ratio * ratio))
}

/// Midpoint between the m-th and (m+1)-th largest scores.
///
/// `m = 0` puts `lambda` just above the maximum, `m = n` at half the
/// smallest positive score. Ties at the boundary make an exact count of `m`
/// impossible; `lambda` then sits at the tied value, which keeps the count
/// at the largest achievable value not above `m`, and a warning is logged.
pub fn select_lambda<T: Scalar>(train_scores: &[T], m: usize) -> Result<Threshold<T>> {
    let n = train_scores.len();
    if n == 0 {
        return Err(Error::Empty("no training scores".into()));
    }
    if m > n {
        return Err(Error::invalid(format!("m = {m} exceeds {n} training scores")));
    }
    if train_scores.iter().any(|s| !s.is_finite() || *s < T::zero()) {
        return Err(Error::invalid("training scores must be finite and non-negative"));
    }
    let mut sorted = train_scores.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    let min_positive = sorted.iter().rev().copied().find(|s| *s > T::zero());
    let half_min_positive = || min_positive.map_or(T::lit(FALLBACK_LAMBDA), |s| s / T::lit(2.0));

    let lambda = if m == 0 {
        let top = sorted[0] * T::lit(1.0 + EMPTY_MARGIN);
        if top > T::zero() { top } else { T::lit(FALLBACK_LAMBDA) }
    } else if m == n {
        half_min_positive()
    } else {
        let (hi, lo) = (sorted[m - 1], sorted[m]);
        if hi == lo {
            log::warn!("scores tied at the decision boundary; fewer than m = {m} examples exceed lambda");
        }
        let mid = (hi + lo) / T::lit(2.0);
        let lambda = if lo < mid && mid < hi { mid } else { lo };
        if lambda > T::zero() { lambda } else { half_min_positive() }
    };
    let exceeding = train_scores.iter().filter(|&&s| squash(s, lambda) > T::lit(0.5)).count();
    if exceeding != m {
        log::warn!("lambda maps {exceeding} training examples above 0.5, wanted {m}");
    }
    Ok(Threshold { lambda, exceeding })
}

/// Detector plus the fitted threshold.
#[derive(Debug, Clone)]
pub struct CalibratedScorer<T> {
    detector: DetectorModel<T>,
    lambda: T,
    m: usize,
    train_scores: Vec<T>,
}

impl<T: Scalar> CalibratedScorer<T> {
    pub fn fit(train: &LabeledDataset<T>, config: &DetectorConfig, seed: u64) -> Result<Self> {
        let detector = fit_detector(train, config, seed)?;
        Self::from_detector(detector, train)
    }

    pub fn from_detector(detector: DetectorModel<T>, train: &LabeledDataset<T>) -> Result<Self> {
        let train_scores = detector.score_rows(train.features())?;
        let m = train.m();
        let Threshold { lambda, .. } = select_lambda(&train_scores, m)?;
        Ok(CalibratedScorer { detector, lambda, m, train_scores })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn detector(&self) -> &DetectorModel<T> {
        &self.detector
    }

    pub fn train_scores(&self) -> &[T] {
        &self.train_scores
    }

    pub fn probability_of_score(&self, score: T) -> T {
        squash(score, self.lambda)
    }

    pub fn conditional_probability(&self, x: &[T]) -> Result<T> {
        Ok(squash(self.detector.score(x)?, self.lambda))
    }
}

pub fn conditional_probability<T: Scalar>(scorer: &CalibratedScorer<T>, x: &[T]) -> Result<T> {
    scorer.conditional_probability(x)
}
