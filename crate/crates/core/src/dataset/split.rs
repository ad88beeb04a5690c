use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AuxiliarySet, Category, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding;

/// How labeled anomalies are divided between test, auxiliary and training
/// sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub seed: u64,
    pub test_anomaly_fraction: f64,
    pub aux_anomaly_fraction: f64,
    pub train_anomaly_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { seed: 0, test_anomaly_fraction: 0.5, aux_anomaly_fraction: 0.4, train_anomaly_fraction: 0.1 }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [self.test_anomaly_fraction, self.aux_anomaly_fraction, self.train_anomaly_fraction];
        if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::invalid("split fractions must lie in (0, 1)"));
        }
        if fractions.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::invalid("split fractions sum to more than 1"));
        }
        Ok(())
    }

    /// Anomaly counts `(test, aux, train)` for `m` anomalies. Train and aux
    /// are floored; test takes the remainder, minus whatever share the
    /// fractions leave unassigned.
    pub fn anomaly_counts(&self, m: usize) -> (usize, usize, usize) {
        let floor = |f: f64| (f * m as f64 + 1e-9).floor() as usize;
        let train = floor(self.train_anomaly_fraction);
        let aux = floor(self.aux_anomaly_fraction);
        let slack = 1.0 - (self.test_anomaly_fraction + self.aux_anomaly_fraction + self.train_anomaly_fraction);
        let unused = floor(slack.max(0.0));
        let test = m.saturating_sub(train + aux + unused);
        (test, aux, train)
    }
}

/// Output of [`split_experiment`]; the index vectors refer to rows of the
/// input dataset.
#[derive(Debug, Clone)]
pub struct ExperimentSplit<T> {
    pub train: LabeledDataset<T>,
    pub test: LabeledDataset<T>,
    pub aux_realistic: AuxiliarySet<T>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub aux_indices: Vec<usize>,
}

/// Balanced test set, realistic auxiliary anomalies and a training set.
pub fn split_experiment<T: Scalar>(data: &LabeledDataset<T>, spec: &SplitSpec) -> Result<ExperimentSplit<T>> {
    spec.validate()?;
    let mut rng = seeding::rng(seeding::stream(spec.seed, "split"));
    let mut anomalies = data.anomaly_indices();
    let mut normals = data.normal_indices();
    let (n_test, n_aux, n_train) = spec.anomaly_counts(anomalies.len());
    if n_test == 0 || n_aux == 0 || n_train == 0 {
        return Err(Error::InsufficientData(format!(
            "{} anomalies give (test, aux, train) = ({n_test}, {n_aux}, {n_train}); each needs at least one",
            anomalies.len()
        )));
    }
    if normals.len() <= n_test {
        return Err(Error::InsufficientData(format!(
            "{} normals cannot fill a balanced test set of {n_test} and leave training normals",
            normals.len()
        )));
    }
    anomalies.shuffle(&mut rng);
    normals.shuffle(&mut rng);

    let mut test_indices: Vec<usize> = anomalies[..n_test].iter().chain(&normals[..n_test]).copied().collect();
    let mut aux_indices: Vec<usize> = anomalies[n_test..n_test + n_aux].to_vec();
    let mut train_indices: Vec<usize> = anomalies[n_test + n_aux..n_test + n_aux + n_train]
        .iter()
        .chain(&normals[n_test..])
        .copied()
        .collect();
    test_indices.sort_unstable();
    aux_indices.sort_unstable();
    train_indices.sort_unstable();

    let aux_rows = data.features().select(Axis(0), &aux_indices);
    let aux_realistic = AuxiliarySet::with_categories(aux_rows, vec![Category::Realistic; n_aux])?;
    Ok(ExperimentSplit {
        train: data.select(&train_indices)?,
        test: data.select(&test_indices)?,
        aux_realistic,
        train_indices,
        test_indices,
        aux_indices,
    })
}

/// Maps rows from `source.ncols()` dimensions to `target_dim` through a
/// Gaussian matrix scaled by `1/sqrt(target_dim)`.
pub fn random_projection<T: Scalar>(source: &Array2<T>, target_dim: usize, seed: u64) -> Array2<T> {
    let mut rng = seeding::rng(seed);
    let scale = 1.0 / (target_dim as f64).sqrt();
    let proj = Array2::from_shape_simple_fn((source.ncols(), target_dim), || {
        T::lit(rng.sample::<f64, _>(StandardNormal) * scale)
    });
    source.dot(&proj)
}

/// Assembles the three-group auxiliary set around `realistic`.
///
/// Returns the shuffled auxiliary set and the training set with the sampled
/// (now indistinguishable) normals removed. Foreign datasets whose
/// dimensionality differs from the training data are randomly projected;
/// `foreign_subsample` caps the rows taken from each foreign dataset.
pub fn build_auxiliary_set<T: Scalar>(
    train: &LabeledDataset<T>,
    realistic: &AuxiliarySet<T>,
    foreign_pool: &[LabeledDataset<T>],
    foreign_subsample: Option<usize>,
    seed: u64,
) -> Result<(AuxiliarySet<T>, LabeledDataset<T>)> {
    let size = realistic.len();
    if size == 0 {
        return Err(Error::Empty("realistic auxiliary anomalies".into()));
    }
    if foreign_pool.is_empty() {
        return Err(Error::Empty("foreign dataset pool".into()));
    }
    if realistic.d() != train.d() {
        return Err(Error::DimensionMismatch { expected: train.d(), got: realistic.d() });
    }
    let d = train.d();
    let normals = train.normal_indices();
    if normals.len() < size {
        return Err(Error::InsufficientData(format!(
            "{} training normals, need {size} indistinguishable anomalies",
            normals.len()
        )));
    }

    let mut rng = seeding::rng(seeding::stream(seed, "auxiliary"));
    let mut taken: Vec<usize> = sample(&mut rng, normals.len(), size).into_iter().map(|i| normals[i]).collect();
    taken.sort_unstable();
    let indistinguishable = train.features().select(Axis(0), &taken);
    let kept: Vec<usize> = (0..train.n()).filter(|i| taken.binary_search(i).is_err()).collect();
    let reduced_train = train.select(&kept)?;

    let mut pooled: Vec<Array2<T>> = Vec::with_capacity(foreign_pool.len());
    for (k, foreign) in foreign_pool.iter().enumerate() {
        let mut rows = foreign.features().to_owned();
        if let Some(cap) = foreign_subsample {
            if cap < rows.nrows() {
                let mut idx = sample(&mut rng, rows.nrows(), cap).into_vec();
                idx.sort_unstable();
                rows = rows.select(Axis(0), &idx);
            }
        }
        if rows.ncols() != d {
            rows = random_projection(&rows, d, seeding::sub_seed(seeding::stream(seed, "projection"), k as u64));
        }
        pooled.push(rows);
    }
    let views: Vec<_> = pooled.iter().map(|a| a.view()).collect();
    let pool = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::invalid(e.to_string()))?;
    let foreign_idx: Vec<usize> = if pool.nrows() >= size {
        sample(&mut rng, pool.nrows(), size).into_vec()
    } else {
        log::warn!("foreign pool has {} rows for {size} unrealistic anomalies; sampling with replacement", pool.nrows());
        (0..size).map(|_| rng.gen_range(0..pool.nrows())).collect()
    };
    let unrealistic = pool.select(Axis(0), &foreign_idx);

    let features = ndarray::concatenate(
        Axis(0),
        &[realistic.features(), indistinguishable.view(), unrealistic.view()],
    )
    .map_err(|e| Error::invalid(e.to_string()))?;
    let categories: Vec<Category> = std::iter::repeat_n(Category::Realistic, size)
        .chain(std::iter::repeat_n(Category::Indistinguishable, size))
        .chain(std::iter::repeat_n(Category::Unrealistic, size))
        .collect();
    let combined = AuxiliarySet::with_categories(features, categories)?;

    // Row order is shuffled so that index-based tie-breaking in rankings
    // carries no information about the category.
    let mut order: Vec<usize> = (0..combined.len()).collect();
    order.shuffle(&mut rng);
    Ok((combined.select(&order), reduced_train))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy(n_normals: usize, m: usize, d: usize) -> LabeledDataset<f64> {
        let n = n_normals + m;
        let features = Array2::from_shape_fn((n, d), |(i, j)| (i * d + j) as f64 * 0.01);
        let labels = (0..n).map(|i| u8::from(i >= n_normals)).collect();
        LabeledDataset::new(features, labels).unwrap()
    }

    #[test]
    fn hundred_anomalies_split_fifty_forty_ten() {
        let data = toy(400, 100, 3);
        let split = split_experiment(&data, &SplitSpec::with_seed(3)).unwrap();
        assert_eq!(split.test.m(), 50);
        assert_eq!(split.test.n() - split.test.m(), 50);
        assert_eq!(split.aux_realistic.len(), 40);
        assert_eq!(split.train.m(), 10);
        assert_eq!(split.train.n(), 10 + 400 - 50);
    }

    #[test]
    fn split_partitions_rows() {
        let data = toy(300, 40, 2);
        let s = split_experiment(&data, &SplitSpec::with_seed(11)).unwrap();
        let mut all: Vec<usize> =
            s.train_indices.iter().chain(&s.test_indices).chain(&s.aux_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..data.n()).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let data = toy(200, 30, 2);
        let a = split_experiment(&data, &SplitSpec::with_seed(5)).unwrap();
        let b = split_experiment(&data, &SplitSpec::with_seed(5)).unwrap();
        assert_eq!(a.train_indices, b.train_indices);
        assert_eq!(a.test_indices, b.test_indices);
        assert_eq!(a.aux_realistic, b.aux_realistic);
    }

    #[test]
    fn five_anomalies_leave_train_empty() {
        let data = toy(100, 5, 2);
        assert_eq!(SplitSpec::default().anomaly_counts(5), (3, 2, 0));
        assert!(matches!(
            split_experiment(&data, &SplitSpec::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fractions_summing_above_one_rejected() {
        let spec = SplitSpec { test_anomaly_fraction: 0.6, ..SplitSpec::default() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn auxiliary_set_has_three_equal_groups() {
        let data = toy(400, 100, 4);
        let split = split_experiment(&data, &SplitSpec::with_seed(1)).unwrap();
        let foreign = toy(80, 0, 8);
        let (aux, train) = build_auxiliary_set(&split.train, &split.aux_realistic, &[foreign], None, 9).unwrap();
        assert_eq!(aux.len(), 120);
        for cat in [Category::Realistic, Category::Indistinguishable, Category::Unrealistic] {
            assert_eq!(aux.category().unwrap().iter().filter(|&&c| c == cat).count(), 40);
        }
        assert_eq!(aux.d(), 4);
        assert!(aux.features().iter().all(|v| v.is_finite()));
        assert_eq!(train.n(), split.train.n() - 40);
        assert_eq!(train.m(), split.train.m());
    }

    #[test]
    fn auxiliary_set_is_deterministic() {
        let data = toy(200, 50, 3);
        let split = split_experiment(&data, &SplitSpec::with_seed(2)).unwrap();
        let foreign = vec![toy(30, 0, 5), toy(30, 0, 2)];
        let a = build_auxiliary_set(&split.train, &split.aux_realistic, &foreign, Some(20), 4).unwrap();
        let b = build_auxiliary_set(&split.train, &split.aux_realistic, &foreign, Some(20), 4).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn projection_fixes_dimensionality() {
        let rows = Array2::from_shape_fn((10, 8), |(i, j)| (i + j) as f64);
        let out = random_projection(&rows, 4, 7);
        assert_eq!(out.dim(), (10, 4));
        assert!(out.iter().all(|v| v.is_finite()));
        let wider = random_projection(&rows, 12, 7);
        assert_eq!(wider.dim(), (10, 12));
    }

    #[test]
    fn missing_inputs_are_errors() {
        let data = toy(50, 20, 2);
        let split = split_experiment(&data, &SplitSpec::with_seed(0)).unwrap();
        assert!(build_auxiliary_set(&split.train, &split.aux_realistic, &[], None, 0).is_err());
        let tiny = toy(3, 2, 2);
        assert!(matches!(
            build_auxiliary_set(&tiny, &split.aux_realistic, &[toy(5, 0, 2)], None, 0),
            Err(Error::InsufficientData(_))
        ));
    }
}
