//! Expected anomaly posterior.
//!
//! Each candidate `x` gets a Beta posterior over its anomaly probability
//! after `N = n * P(X=x)` pseudo-observations, `alpha_1 = N * P(Y=1|X=x)` of
//! them anomalous. The quality score is the posterior mean
//! `(alpha_0 + alpha_1) / (alpha_0 + beta_0 + N)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibratedScorer;
use crate::dataset::{AuxiliarySet, LabeledDataset};
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::rarity::{RarityConfig, RarityModel};
use crate::scalar::Scalar;
use crate::seeding;

/// Prior mean used when the training set holds no anomaly.
pub const EMPTY_CONTAMINATION_ALPHA0: f64 = 0.01;
const MIN_BETA0: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha0: f64,
    pub beta0: f64,
}

impl BetaPrior {
    pub fn new(alpha0: f64, beta0: f64) -> Result<Self> {
        if !(alpha0.is_finite() && beta0.is_finite() && alpha0 > 0.0 && beta0 > 0.0) {
            return Err(Error::invalid(format!("prior ({alpha0}, {beta0}) must be positive")));
        }
        Ok(BetaPrior { alpha0, beta0 })
    }

    /// `(alpha0, 1 - alpha0)`.
    pub fn unit_mass(alpha0: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(Error::invalid(format!("alpha0 = {alpha0} must lie in (0, 1)")));
        }
        Self::new(alpha0, 1.0 - alpha0)
    }

    pub fn mean(&self) -> f64 {
        self.alpha0 / (self.alpha0 + self.beta0)
    }
}

/// Prior set to the training contamination `(m/n, 1 - m/n)`.
pub fn default_prior<T: Scalar>(train: &LabeledDataset<T>) -> BetaPrior {
    contamination_prior(train.m(), train.n())
}

pub fn contamination_prior(m: usize, n: usize) -> BetaPrior {
    assert!(n >= 1 && m <= n);
    if m == 0 {
        return BetaPrior { alpha0: EMPTY_CONTAMINATION_ALPHA0, beta0: 1.0 - EMPTY_CONTAMINATION_ALPHA0 };
    }
    let rate = m as f64 / n as f64;
    let beta0 = 1.0 - rate;
    if beta0 < MIN_BETA0 {
        log::warn!("training set is all anomalies; clamping beta0 to {MIN_BETA0}");
        return BetaPrior { alpha0: rate, beta0: MIN_BETA0 };
    }
    BetaPrior { alpha0: rate, beta0 }
}

/// How the pipeline picks its prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    /// `(m/n, 1 - m/n)` from the training set.
    #[default]
    Contamination,
    /// `(alpha0, 1 - alpha0)`.
    Alpha0(f64),
    Explicit { alpha0: f64, beta0: f64 },
}

impl PriorSpec {
    pub fn resolve(&self, m: usize, n: usize) -> Result<BetaPrior> {
        match *self {
            PriorSpec::Contamination => Ok(contamination_prior(m, n)),
            PriorSpec::Alpha0(a) => BetaPrior::unit_mass(a),
            PriorSpec::Explicit { alpha0, beta0 } => BetaPrior::new(alpha0, beta0),
        }
    }
}

/// Every intermediate of the score for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EapComponents {
    pub density: f64,
    pub conditional_prob: f64,
    pub n: usize,
    pub pseudo_count: f64,
    pub pseudo_anomalies: f64,
    pub phi: f64,
}

pub fn eap_score(prior: &BetaPrior, n: usize, density: f64, conditional_prob: f64) -> Result<EapComponents> {
    if n == 0 {
        return Err(Error::invalid("training size must be at least 1"));
    }
    if !(0.0..1.0).contains(&density) {
        return Err(Error::invalid(format!("density {density} outside [0, 1)")));
    }
    if !(0.0..=1.0).contains(&conditional_prob) {
        return Err(Error::invalid(format!("conditional probability {conditional_prob} outside [0, 1]")));
    }
    let pseudo_count = n as f64 * density;
    let pseudo_anomalies = pseudo_count * conditional_prob;
    let phi = (prior.alpha0 + pseudo_anomalies) / (prior.alpha0 + prior.beta0 + pseudo_count);
    Ok(EapComponents { density, conditional_prob, n, pseudo_count, pseudo_anomalies, phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EapConfig {
    pub detector: DetectorConfig,
    pub rarity: RarityConfig,
    pub prior: PriorSpec,
}

/// Fitted detector, calibration, rarity model and prior.
#[derive(Debug, Clone)]
pub struct EapPipeline<T> {
    scorer: CalibratedScorer<T>,
    rarity: RarityModel<T>,
    prior: BetaPrior,
    n: usize,
}

impl<T: Scalar> EapPipeline<T> {
    pub fn fit(train: &LabeledDataset<T>, config: &EapConfig, seed: u64) -> Result<Self> {
        let prior = config.prior.resolve(train.m(), train.n())?;
        let scorer = CalibratedScorer::fit(train, &config.detector, seeding::stream(seed, "detector"))?;
        let rarity = RarityModel::fit(train, &config.rarity)?;
        Ok(EapPipeline { scorer, rarity, prior, n: train.n() })
    }

    /// Same fitted state with another prior.
    pub fn with_prior(&self, prior: BetaPrior) -> Self {
        EapPipeline { prior, ..self.clone() }
    }

    pub fn prior(&self) -> &BetaPrior {
        &self.prior
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scorer(&self) -> &CalibratedScorer<T> {
        &self.scorer
    }

    pub fn rarity(&self) -> &RarityModel<T> {
        &self.rarity
    }

    pub fn components(&self, x: &[T]) -> Result<EapComponents> {
        let density = self.rarity.density(x)?.to_f64_lossy();
        let prob = self.scorer.conditional_probability(x)?.to_f64_lossy();
        eap_score(&self.prior, self.n, density, prob)
    }

    /// Components for every auxiliary row, in row order.
    pub fn score_set(&self, aux: &AuxiliarySet<T>) -> Result<Vec<EapComponents>> {
        if aux.is_empty() {
            return Ok(Vec::new());
        }
        if aux.d() != self.rarity.d() {
            return Err(Error::DimensionMismatch { expected: self.rarity.d(), got: aux.d() });
        }
        (0..aux.len()).into_par_iter().map(|i| self.components(aux.row_slice(i))).collect()
    }
}

/// Fits the pipeline on `train` and scores every row of `aux`.
pub fn score_auxiliary_set<T: Scalar>(
    train: &LabeledDataset<T>,
    aux: &AuxiliarySet<T>,
    config: &EapConfig,
    seed: u64,
) -> Result<Vec<EapComponents>> {
    if aux.is_empty() {
        return Ok(Vec::new());
    }
    EapPipeline::fit(train, config, seed)?.score_set(aux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn prior_from_contamination() {
        let p = contamination_prior(10, 100);
        assert_eq!((p.alpha0, p.beta0), (0.1, 0.9));
        let p = contamination_prior(0, 100);
        assert_eq!((p.alpha0, p.beta0), (0.01, 0.99));
        let p = contamination_prior(100, 100);
        assert_eq!((p.alpha0, p.beta0), (1.0, 1e-6));
    }

    #[test]
    fn default_prior_reads_the_training_labels() {
        let features = Array2::from_shape_fn((100, 1), |(i, _)| i as f64);
        let labels = (0..100).map(|i| u8::from(i < 10)).collect();
        let train = LabeledDataset::new(features, labels).unwrap();
        assert_eq!(default_prior(&train), BetaPrior { alpha0: 0.1, beta0: 0.9 });
    }

    #[test]
    fn closed_form_example() {
        let prior = BetaPrior::new(0.1, 0.9).unwrap();
        let c = eap_score(&prior, 100, 0.02, 0.8).unwrap();
        assert!((c.phi - 1.7 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{:.4}", c.phi), "0.5667");
        assert!((c.pseudo_count - 2.0).abs() < 1e-12);
        assert!((c.pseudo_anomalies - 1.6).abs() < 1e-12);
    }

    #[test]
    fn zero_density_returns_prior_mean() {
        let prior = BetaPrior::new(0.3, 0.45).unwrap();
        let c = eap_score(&prior, 1000, 0.0, 0.99).unwrap();
        assert_eq!(c.phi, 0.3 / 0.75);
    }

    #[test]
    fn certain_anomaly_matches_density_formula() {
        let prior = BetaPrior::new(0.2, 0.8).unwrap();
        let c = eap_score(&prior, 50, 0.1, 1.0).unwrap();
        assert!((c.phi - (1.0 - 0.8 / (1.0 + 5.0))).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let prior = BetaPrior::new(0.1, 0.9).unwrap();
        assert!(eap_score(&prior, 10, 1.0, 0.5).is_err());
        assert!(eap_score(&prior, 10, -0.1, 0.5).is_err());
        assert!(eap_score(&prior, 10, 0.1, 1.5).is_err());
        assert!(eap_score(&prior, 0, 0.1, 0.5).is_err());
        assert!(BetaPrior::new(0.0, 1.0).is_err());
        assert!(BetaPrior::unit_mass(1.0).is_err());
    }

    proptest! {
        #[test]
        fn p1_distance_to_conditional_probability(
            a in 1e-3f64..5.0, b in 1e-3f64..5.0, n in 1usize..1_000_000,
            density in 0.0f64..0.999, p in 0.0f64..=1.0,
        ) {
            let prior = BetaPrior::new(a, b).unwrap();
            let c = eap_score(&prior, n, density, p).unwrap();
            let bound = (a + b) / (a + b + n as f64 * density);
            prop_assert!((c.phi - p).abs() <= bound);
            prop_assert!(c.phi > 0.0 && c.phi < 1.0);
            prop_assert!(c.pseudo_anomalies <= c.pseudo_count);
        }

        #[test]
        fn p3_increasing_in_density(a in 1e-3f64..0.49, n in 10usize..10_000, d1 in 1e-6f64..0.5, gap in 1e-3f64..0.4) {
            let prior = BetaPrior::unit_mass(a).unwrap();
            let lo = eap_score(&prior, n, d1, 1.0).unwrap().phi;
            let hi = eap_score(&prior, n, d1 + gap, 1.0).unwrap().phi;
            prop_assert!(hi > lo);
        }
    }
}
