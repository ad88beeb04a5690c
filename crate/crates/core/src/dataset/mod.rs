//! Labeled training data, auxiliary candidate sets, and the experiment split
//! protocol.

mod csv_io;
mod split;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use csv_io::{load_auxiliary_csv, load_csv, write_auxiliary_csv, write_dataset_csv};
pub use split::{build_auxiliary_set, random_projection, split_experiment, ExperimentSplit, SplitSpec};
pub use synthetic::{generate_synthetic_benchmark, SyntheticConfig};

/// Feature matrix with binary labels (0 normal, 1 anomaly).
///
/// Rows are stored in standard (row-major) layout so `row_slice` never
/// copies.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    features: Array2<T>,
    labels: Vec<u8>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(features: Array2<T>, labels: Vec<u8>) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::Empty("dataset has no feature columns".into()));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if let Some(pos) = labels.iter().position(|&y| y > 1) {
            return Err(Error::invalid(format!("label {} at row {pos} is not 0/1", labels[pos])));
        }
        check_finite(features.view())?;
        let features = features.as_standard_layout().into_owned();
        Ok(LabeledDataset { features, labels })
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// Number of anomalies, always derived from the labels.
    pub fn m(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.features.row(i)
    }

    pub fn row_slice(&self, i: usize) -> &[T] {
        let d = self.d();
        &self.features.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn anomaly_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == 1).collect()
    }

    pub fn normal_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.labels[i] == 0).collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels)
    }

    /// New dataset with `rows` appended, all carrying `label`.
    pub fn with_appended(&self, rows: ArrayView2<'_, T>, label: u8) -> Result<Self> {
        if rows.nrows() == 0 {
            return Ok(self.clone());
        }
        if rows.ncols() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: rows.ncols() });
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), rows.view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut labels = self.labels.clone();
        labels.extend(std::iter::repeat_n(label, rows.nrows()));
        Self::new(features, labels)
    }
}

/// Definition-1 category of an auxiliary anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Realistic,
    Unrealistic,
    Indistinguishable,
}

impl Category {
    /// Ground-truth quality implied by the category.
    pub fn quality(self) -> PseudoQuality {
        match self {
            Category::Realistic => PseudoQuality::Good,
            Category::Unrealistic | Category::Indistinguishable => PseudoQuality::Poor,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Realistic => "realistic",
            Category::Unrealistic => "unrealistic",
            Category::Indistinguishable => "indistinguishable",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "realistic" => Ok(Category::Realistic),
            "unrealistic" => Ok(Category::Unrealistic),
            "indistinguishable" => Ok(Category::Indistinguishable),
            other => Err(Error::invalid(format!("unknown category `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PseudoQuality {
    Good,
    Poor,
}

impl PseudoQuality {
    pub fn as_str(self) -> &'static str {
        match self {
            PseudoQuality::Good => "good",
            PseudoQuality::Poor => "poor",
        }
    }
}

impl fmt::Display for PseudoQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PseudoQuality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Ok(PseudoQuality::Good),
            "poor" => Ok(PseudoQuality::Poor),
            other => Err(Error::invalid(format!("unknown pseudo-quality `{other}`"))),
        }
    }
}

/// Candidate anomalies with optional ground-truth tags.
///
/// May be empty (zero rows), unlike [`LabeledDataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet<T> {
    features: Array2<T>,
    category: Option<Vec<Category>>,
    pseudo_quality: Option<Vec<PseudoQuality>>,
}

impl<T: Scalar> AuxiliarySet<T> {
    pub fn new(
        features: Array2<T>,
        category: Option<Vec<Category>>,
        pseudo_quality: Option<Vec<PseudoQuality>>,
    ) -> Result<Self> {
        let l = features.nrows();
        if features.ncols() == 0 {
            return Err(Error::Empty("auxiliary set has no feature columns".into()));
        }
        for tags in [category.as_ref().map(Vec::len), pseudo_quality.as_ref().map(Vec::len)]
            .into_iter()
            .flatten()
        {
            if tags != l {
                return Err(Error::DimensionMismatch { expected: l, got: tags });
            }
        }
        if let (Some(cat), Some(qual)) = (&category, &pseudo_quality) {
            if let Some(i) = (0..l).find(|&i| cat[i].quality() != qual[i]) {
                return Err(Error::invalid(format!(
                    "row {i}: category {} inconsistent with pseudo-quality {}",
                    cat[i], qual[i]
                )));
            }
        }
        check_finite(features.view())?;
        let features = features.as_standard_layout().into_owned();
        Ok(AuxiliarySet { features, category, pseudo_quality })
    }

    /// Untagged set.
    pub fn from_features(features: Array2<T>) -> Result<Self> {
        Self::new(features, None, None)
    }

    /// Set tagged by category, with the pseudo-quality derived from it.
    pub fn with_categories(features: Array2<T>, category: Vec<Category>) -> Result<Self> {
        let quality = category.iter().map(|c| c.quality()).collect();
        Self::new(features, Some(category), Some(quality))
    }

    pub fn empty(d: usize) -> Self {
        AuxiliarySet { features: Array2::zeros((0, d)), category: None, pseudo_quality: None }
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn row_slice(&self, i: usize) -> &[T] {
        let d = self.d();
        &self.features.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn category(&self) -> Option<&[Category]> {
        self.category.as_deref()
    }

    pub fn pseudo_quality(&self) -> Option<&[PseudoQuality]> {
        self.pseudo_quality.as_deref()
    }

    /// Pseudo-quality tags, falling back to the category-implied ones.
    pub fn quality_tags(&self) -> Option<Vec<PseudoQuality>> {
        self.pseudo_quality
            .clone()
            .or_else(|| self.category.as_ref().map(|c| c.iter().map(|c| c.quality()).collect()))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        AuxiliarySet {
            features: self.features.select(Axis(0), indices),
            category: self.category.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
            pseudo_quality: self
                .pseudo_quality
                .as_ref()
                .map(|q| indices.iter().map(|&i| q[i]).collect()),
        }
    }

    /// Rows as a dataset where every row is labeled anomalous.
    pub fn to_anomalies(&self) -> Result<LabeledDataset<T>> {
        LabeledDataset::new(self.features.clone(), vec![1; self.len()])
    }
}

pub(crate) fn check_finite<T: Scalar>(features: ArrayView2<'_, T>) -> Result<()> {
    for ((i, j), v) in features.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("feature at row {i}, column {j}")));
        }
    }
    Ok(())
}

/// Validates a query vector against the expected dimensionality.
pub(crate) fn check_query<T: Scalar>(x: &[T], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query vector".into()));
    }
    Ok(())
}
