//! Isolation Forest, used as the unsupervised prior of the detector.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_query, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding::{self, Rng};

const EULER_GAMMA: f64 = 0.577_215_664_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationForestConfig {
    pub tree_count: usize,
    /// `None` means `min(256, n)`.
    pub subsample_size: Option<usize>,
}

impl Default for IsolationForestConfig {
    fn default() -> Self {
        IsolationForestConfig { tree_count: 100, subsample_size: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node<T> {
    Split { feature: usize, threshold: T, left: Box<Node<T>>, right: Box<Node<T>> },
    Leaf { size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree<T> {
    root: Node<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestModel<T> {
    trees: Vec<IsolationTree<T>>,
    subsample_size: usize,
    normalizer: f64,
    d: usize,
}

/// Average path length of an unsuccessful BST search over `size` points.
pub fn expected_path_length(size: usize) -> f64 {
    match size {
        0 | 1 => 0.0,
        2 => 1.0,
        s => {
            let s = s as f64;
            2.0 * ((s - 1.0).ln() + EULER_GAMMA) - 2.0 * (s - 1.0) / s
        }
    }
}

fn height_limit(subsample_size: usize) -> usize {
    (subsample_size as f64).log2().ceil() as usize
}

struct Grower<'a, T> {
    data: &'a LabeledDataset<T>,
    max_depth: usize,
}

impl<T: Scalar> Grower<'_, T> {
    fn grow(&self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> Node<T> {
        if depth >= self.max_depth || rows.len() <= 1 {
            return Node::Leaf { size: rows.len() };
        }
        let d = self.data.d();
        // Constant features cannot split; give up after d draws.
        for _ in 0..d {
            let feature = rng.gen_range(0..d);
            let (lo, hi) = rows.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &r| {
                let v = self.data.row_slice(r)[feature];
                (lo.min(v), hi.max(v))
            });
            if hi <= lo {
                continue;
            }
            let u = T::lit(rng.gen::<f64>());
            let mut threshold = lo + (hi - lo) * u;
            if threshold >= hi {
                threshold = lo;
            }
            let mut split = 0;
            for i in 0..rows.len() {
                if self.data.row_slice(rows[i])[feature] <= threshold {
                    rows.swap(i, split);
                    split += 1;
                }
            }
            let (left, right) = rows.split_at_mut(split);
            let left = self.grow(left, depth + 1, rng);
            let right = self.grow(right, depth + 1, rng);
            return Node::Split { feature, threshold, left: Box::new(left), right: Box::new(right) };
        }
        Node::Leaf { size: rows.len() }
    }
}

impl<T: Scalar> IsolationTree<T> {
    fn path_length(&self, x: &[T]) -> f64 {
        let mut node = &self.root;
        let mut depth = 0.0;
        loop {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                    depth += 1.0;
                }
                Node::Leaf { size } => return depth + expected_path_length(*size),
            }
        }
    }

    fn depth(&self) -> usize {
        fn walk<T>(node: &Node<T>) -> usize {
            match node {
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.root)
    }
}

/// Fits `tree_count` trees, each on its own subsample drawn from a sub-seed
/// of `seed`.
pub fn fit_iforest<T: Scalar>(
    train: &LabeledDataset<T>,
    tree_count: usize,
    subsample_size: usize,
    seed: u64,
) -> Result<IsolationForestModel<T>> {
    if tree_count == 0 {
        return Err(Error::invalid("isolation forest needs at least one tree"));
    }
    if subsample_size < 2 {
        return Err(Error::invalid(format!("subsample size {subsample_size} must be at least 2")));
    }
    if subsample_size > train.n() {
        return Err(Error::invalid(format!(
            "subsample size {subsample_size} exceeds {} training rows",
            train.n()
        )));
    }
    let subsamples: Vec<Vec<usize>> = (0..tree_count)
        .map(|t| {
            let mut rng = seeding::rng(seeding::sub_seed(seeding::stream(seed, "iforest-rows"), t as u64));
            sample(&mut rng, train.n(), subsample_size).into_vec()
        })
        .collect();
    fit_on_subsamples(train, subsamples, seed)
}

/// Fits one tree per given row subset. Split draws depend only on the seed
/// and on the subset's contents, not on where the rows sit in `train`.
pub fn fit_on_subsamples<T: Scalar>(
    train: &LabeledDataset<T>,
    subsamples: Vec<Vec<usize>>,
    seed: u64,
) -> Result<IsolationForestModel<T>> {
    let subsample_size = subsamples.first().map(Vec::len).unwrap_or(0);
    if subsamples.iter().any(|s| s.len() != subsample_size) || subsample_size < 2 {
        return Err(Error::invalid("subsamples must share a size of at least 2"));
    }
    let grower = Grower { data: train, max_depth: height_limit(subsample_size) };
    let trees = subsamples
        .into_par_iter()
        .enumerate()
        .map(|(t, mut rows)| {
            let mut rng = seeding::rng(seeding::sub_seed(seeding::stream(seed, "iforest-splits"), t as u64));
            IsolationTree { root: grower.grow(&mut rows, 0, &mut rng) }
        })
        .collect();
    Ok(IsolationForestModel {
        trees,
        subsample_size,
        normalizer: expected_path_length(subsample_size),
        d: train.d(),
    })
}

/// Fits with `config`, resolving the default subsample size.
pub fn fit_iforest_with<T: Scalar>(
    train: &LabeledDataset<T>,
    config: &IsolationForestConfig,
    seed: u64,
) -> Result<IsolationForestModel<T>> {
    let psi = config.subsample_size.unwrap_or(256).min(train.n());
    if psi < 2 {
        return Err(Error::InsufficientData("isolation forest needs at least 2 training rows".into()));
    }
    fit_iforest(train, config.tree_count, psi, seed)
}

impl<T: Scalar> IsolationForestModel<T> {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(IsolationTree::depth).max().unwrap_or(0)
    }

    /// `2^(-E[h(x)] / c(psi))`; higher is more anomalous.
    pub fn score(&self, x: &[T]) -> Result<T> {
        check_query(x, self.d)?;
        Ok(T::lit(self.score_unchecked(x)))
    }

    pub(crate) fn score_unchecked(&self, x: &[T]) -> f64 {
        let mean = self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        2f64.powf(-mean / self.normalizer)
    }
}

/// Free-function form of [`IsolationForestModel::score`].
pub fn iforest_score<T: Scalar>(model: &IsolationForestModel<T>, x: &[T]) -> Result<T> {
    model.score(x)
}
