//! Expected Anomaly Posterior: quality scores for auxiliary anomalies, the
//! baseline evaluators they are compared against, and a benchmark harness.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix it to `f64`, which is what the harness and CLI use.

pub mod calibration;
pub mod dataset;
pub mod detector;
pub mod downstream;
pub mod eap;
pub mod error;
pub mod evaluators;
pub mod harness;
pub mod iforest;
pub mod metrics;
pub mod rarity;
pub mod scalar;
pub mod seeding;

pub use dataset::{Category, PseudoQuality};
pub use eap::{BetaPrior, EapComponents, EapConfig, PriorSpec};
pub use error::{Error, Result};
pub use evaluators::Method;
pub use scalar::Scalar;

pub type Dataset = dataset::LabeledDataset<f64>;
pub type AuxiliarySet = dataset::AuxiliarySet<f64>;
pub type Pipeline = eap::EapPipeline<f64>;
pub type Detector = detector::DetectorModel<f64>;
pub type Scorer = calibration::CalibratedScorer<f64>;
pub type Rarity = rarity::RarityModel<f64>;
pub type IsolationForest = iforest::IsolationForestModel<f64>;
pub type Forest = downstream::ForestClassifier<f64>;

pub type Dataset32 = dataset::LabeledDataset<f32>;
pub type AuxiliarySet32 = dataset::AuxiliarySet<f32>;
pub type Pipeline32 = eap::EapPipeline<f32>;
