//! Downstream classifier retrained as auxiliary anomalies are injected, and
//! the learning curves built from it.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AuxiliarySet, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::{euclidean, Scalar};
use crate::seeding::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub tree_count: usize,
    pub max_depth: usize,
    /// Features considered per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    /// Draw a bootstrap sample per tree.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { tree_count: 50, max_depth: 8, max_features: None, min_samples_split: 2, bootstrap: true }
    }
}

impl ForestConfig {
    /// Single depth-limited tree over all features, used as the weak
    /// learner of the out-of-bag evaluator.
    pub fn weak_learner(max_depth: usize) -> Self {
        ForestConfig { tree_count: 1, max_depth, max_features: Some(usize::MAX), min_samples_split: 2, bootstrap: false }
    }
}

/// Anything that maps a feature vector to a 0/1 prediction.
pub trait Classifier<T>: Send + Sync {
    fn predict(&self, x: &[T]) -> u8;
}

/// Builds a fresh classifier from a training set.
pub trait ModelFactory<T: Scalar>: Send + Sync {
    fn fit(&self, train: &LabeledDataset<T>, seed: u64) -> Result<Box<dyn Classifier<T>>>;
}

#[derive(Debug, Clone, PartialEq)]
enum Node<T> {
    Split { feature: usize, threshold: T, left: Box<Node<T>>, right: Box<Node<T>> },
    Leaf { class: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    root: Node<T>,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn predict(&self, x: &[T]) -> u8 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                Node::Leaf { class } => return *class,
            }
        }
    }
}

fn gini(anomalies: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = anomalies as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a, T> {
    data: &'a LabeledDataset<T>,
    max_depth: usize,
    max_features: usize,
    min_samples_split: usize,
}

impl<T: Scalar> TreeBuilder<'_, T> {
    fn leaf(anomalies: usize, total: usize) -> Node<T> {
        // Ties go to the normal class.
        Node::Leaf { class: u8::from(2 * anomalies > total) }
    }

    fn build(&self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> Node<T> {
        let total = rows.len();
        let anomalies = rows.iter().filter(|&&r| self.data.labels()[r] == 1).count();
        if anomalies == 0 || anomalies == total || depth >= self.max_depth || total < self.min_samples_split {
            return Self::leaf(anomalies, total);
        }
        let d = self.data.d();
        let features = sample(rng, d, self.max_features.min(d));
        let mut best: Option<(f64, usize, T)> = None;
        let mut column: Vec<(T, u8)> = Vec::with_capacity(total);
        for feature in features.iter() {
            column.clear();
            column.extend(rows.iter().map(|&r| (self.data.row_slice(r)[feature], self.data.labels()[r])));
            column.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left_anomalies = 0;
            for i in 0..total - 1 {
                left_anomalies += usize::from(column[i].1);
                if column[i].0 == column[i + 1].0 {
                    continue;
                }
                let left = i + 1;
                let right = total - left;
                let impurity = (left as f64 * gini(left_anomalies, left)
                    + right as f64 * gini(anomalies - left_anomalies, right))
                    / total as f64;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    let (lo, hi) = (column[i].0, column[i + 1].0);
                    let mid = (lo + hi) / T::lit(2.0);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((impurity, feature, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return Self::leaf(anomalies, total);
        };
        let mut split = 0;
        for i in 0..total {
            if self.data.row_slice(rows[i])[feature] <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (left, right) = rows.split_at_mut(split);
        let left = self.build(left, depth + 1, rng);
        let right = self.build(right, depth + 1, rng);
        Node::Split { feature, threshold, left: Box::new(left), right: Box::new(right) }
    }
}

/// Random forest with Gini splits; a constant classifier when the training
/// set holds one class only.
#[derive(Debug, Clone, PartialEq)]
pub enum ForestClassifier<T> {
    Trees(Vec<DecisionTree<T>>),
    Constant(u8),
}

pub fn fit_forest<T: Scalar>(train: &LabeledDataset<T>, config: &ForestConfig, seed: u64) -> Result<ForestClassifier<T>> {
    if config.tree_count == 0 || config.max_depth == 0 {
        return Err(Error::invalid("forest needs at least one tree of depth at least one"));
    }
    let m = train.m();
    if m == 0 || m == train.n() {
        log::warn!("single-class training set; forest predicts class {} everywhere", u8::from(m > 0));
        return Ok(ForestClassifier::Constant(u8::from(m > 0)));
    }
    let d = train.d();
    let builder = TreeBuilder {
        data: train,
        max_depth: config.max_depth,
        max_features: config.max_features.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d),
        min_samples_split: config.min_samples_split.max(2),
    };
    let n = train.n();
    let grow = |t: usize| {
        let mut rng = seeding::rng(seeding::sub_seed(seed, t as u64));
        let mut rows: Vec<usize> =
            if config.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
        DecisionTree { root: builder.build(&mut rows, 0, &mut rng) }
    };
    let trees = if config.tree_count > 1 {
        (0..config.tree_count).into_par_iter().map(grow).collect()
    } else {
        vec![grow(0)]
    };
    Ok(ForestClassifier::Trees(trees))
}

impl<T: Scalar> ForestClassifier<T> {
    /// Fraction of trees voting anomaly.
    pub fn anomaly_vote(&self, x: &[T]) -> f64 {
        match self {
            ForestClassifier::Constant(c) => f64::from(*c),
            ForestClassifier::Trees(trees) => {
                trees.iter().map(|t| f64::from(t.predict(x))).sum::<f64>() / trees.len() as f64
            }
        }
    }
}

impl<T: Scalar> Classifier<T> for ForestClassifier<T> {
    fn predict(&self, x: &[T]) -> u8 {
        u8::from(self.anomaly_vote(x) > 0.5)
    }
}

/// Random forests with a fixed configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForestFactory(pub ForestConfig);

impl<T: Scalar> ModelFactory<T> for ForestFactory {
    fn fit(&self, train: &LabeledDataset<T>, seed: u64) -> Result<Box<dyn Classifier<T>>> {
        Ok(Box::new(fit_forest(train, &self.0, seed)?))
    }
}

/// 1-nearest-neighbor classifier; ties go to the lower row index.
#[derive(Debug, Clone)]
pub struct NearestNeighbor<T> {
    train: LabeledDataset<T>,
}

impl<T: Scalar> Classifier<T> for NearestNeighbor<T> {
    fn predict(&self, x: &[T]) -> u8 {
        let mut best = (T::infinity(), 0u8);
        for i in 0..self.train.n() {
            let dist = euclidean(x, self.train.row_slice(i));
            if dist < best.0 {
                best = (dist, self.train.labels()[i]);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NearestNeighborFactory;

impl<T: Scalar> ModelFactory<T> for NearestNeighborFactory {
    fn fit(&self, train: &LabeledDataset<T>, _seed: u64) -> Result<Box<dyn Classifier<T>>> {
        Ok(Box::new(NearestNeighbor { train: train.clone() }))
    }
}

/// Mean of per-class recalls over the classes present in `test`.
pub fn balanced_accuracy<T: Scalar>(model: &dyn Classifier<T>, test: &LabeledDataset<T>) -> f64 {
    let mut hits = [0usize; 2];
    let mut totals = [0usize; 2];
    for i in 0..test.n() {
        let y = usize::from(test.labels()[i]);
        totals[y] += 1;
        if usize::from(model.predict(test.row_slice(i))) == y {
            hits[y] += 1;
        }
    }
    let recalls: Vec<f64> =
        (0..2).filter(|&c| totals[c] > 0).map(|c| hits[c] as f64 / totals[c] as f64).collect();
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

/// Plain accuracy.
pub fn accuracy<T: Scalar>(model: &dyn Classifier<T>, test: &LabeledDataset<T>) -> f64 {
    let hits = (0..test.n()).filter(|&i| model.predict(test.row_slice(i)) == test.labels()[i]).count();
    hits as f64 / test.n() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    /// Injected anomaly counts, strictly increasing from 0.
    pub xs: Vec<usize>,
    /// Balanced test accuracy at each count.
    pub ys: Vec<f64>,
}

/// 1 up to 120 candidates, then `ceil(l / 120)`.
pub fn default_step(l: usize) -> usize {
    if l <= 120 {
        1
    } else {
        l.div_ceil(120)
    }
}

/// Counts `0, step, 2*step, ...` up to `floor(budget * l)`, with the final
/// count always included.
pub fn curve_counts(l: usize, budget_fraction: f64, step: usize) -> Vec<usize> {
    let last = ((budget_fraction * l as f64) + 1e-9).floor() as usize;
    let mut xs: Vec<usize> = (0..=last).step_by(step.max(1)).collect();
    if xs.last() != Some(&last) {
        xs.push(last);
    }
    xs
}

/// Retrains on `train` plus the top-`c` candidates of `ranking` (labeled
/// anomalous) for every count `c`, recording balanced accuracy on `test`.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve<T: Scalar>(
    train: &LabeledDataset<T>,
    aux: &AuxiliarySet<T>,
    ranking: &[usize],
    test: &LabeledDataset<T>,
    budget_fraction: f64,
    step: usize,
    factory: &dyn ModelFactory<T>,
    seed: u64,
) -> Result<LearningCurve> {
    let l = aux.len();
    if ranking.len() != l {
        return Err(Error::invalid(format!("ranking has {} entries for {l} candidates", ranking.len())));
    }
    let mut seen = vec![false; l];
    for &r in ranking {
        if r >= l || std::mem::replace(&mut seen[r], true) {
            return Err(Error::invalid("ranking is not a permutation of the candidates"));
        }
    }
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::invalid(format!("budget fraction {budget_fraction} outside (0, 1]")));
    }
    if step == 0 {
        return Err(Error::invalid("learning-curve step must be positive"));
    }
    let xs = curve_counts(l, budget_fraction, step);
    let ys = xs
        .par_iter()
        .map(|&c| {
            let injected = aux.features().select(ndarray::Axis(0), &ranking[..c]);
            let data = train.with_appended(injected.view(), 1)?;
            let model = factory.fit(&data, seeding::sub_seed(seed, c as u64))?;
            Ok(balanced_accuracy(model.as_ref(), test))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LearningCurve { xs, ys })
}
