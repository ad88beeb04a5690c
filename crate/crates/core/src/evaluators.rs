//! Baseline quality evaluators. Each scores an auxiliary anomaly by what it
//! contributes when added, on its own, to the training set with label 1.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AuxiliarySet, LabeledDataset};
use crate::downstream::{accuracy, fit_forest, Classifier, ForestConfig, ModelFactory};
use crate::eap::EapPipeline;
use crate::error::{Error, Result};
use crate::scalar::{euclidean, Scalar};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Eap,
    Loo,
    KnnShap,
    DataOob,
    DataBanzhaf,
    Random,
    Rarity,
    Px,
    Pyx,
    PyxPlusNpx,
}

/// Baselines that are recognised by name but not provided.
pub const UNAVAILABLE_METHODS: [&str; 5] = ["datashap", "betashap", "ame", "lava", "inf"];

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Eap,
        Method::Loo,
        Method::KnnShap,
        Method::DataOob,
        Method::DataBanzhaf,
        Method::Random,
        Method::Rarity,
        Method::Px,
        Method::Pyx,
        Method::PyxPlusNpx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Eap => "eap",
            Method::Loo => "loo",
            Method::KnnShap => "knnshap",
            Method::DataOob => "dataoob",
            Method::DataBanzhaf => "databanzhaf",
            Method::Random => "random",
            Method::Rarity => "rarity",
            Method::Px => "px",
            Method::Pyx => "pyx",
            Method::PyxPlusNpx => "pyx_plus_npx",
        }
    }

    /// Whether the method retrains a downstream model per candidate.
    pub fn is_retraining(self) -> bool {
        matches!(self, Method::Loo | Method::DataOob | Method::DataBanzhaf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        if let Some(m) = Method::ALL.into_iter().find(|m| m.as_str() == key) {
            return Ok(m);
        }
        if UNAVAILABLE_METHODS.contains(&key.as_str()) {
            return Err(Error::UnavailableMethod(key));
        }
        Err(Error::UnknownMethod(s.to_string()))
    }
}

/// Parses a comma-separated method list, keeping the given order.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods: Vec<Method> =
        list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods given"));
    }
    Ok(methods)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorParams {
    pub knn_k: usize,
    pub oob_models: usize,
    pub oob_max_depth: usize,
    pub banzhaf_samples: usize,
    pub rarity_k: usize,
}

impl Default for EvaluatorParams {
    fn default() -> Self {
        EvaluatorParams { knn_k: 10, oob_models: 50, oob_max_depth: 4, banzhaf_samples: 50, rarity_k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorResult {
    pub method: String,
    pub scores: Vec<f64>,
    pub seconds: f64,
}

fn timed(method: &str, f: impl FnOnce() -> Result<Vec<f64>>) -> Result<EvaluatorResult> {
    let start = Instant::now();
    let scores = f()?;
    Ok(EvaluatorResult { method: method.to_string(), scores, seconds: start.elapsed().as_secs_f64() })
}

fn require_validation<T: Scalar>(validation: &LabeledDataset<T>, aux: &AuxiliarySet<T>) -> Result<()> {
    if !aux.is_empty() && aux.d() != validation.d() {
        return Err(Error::DimensionMismatch { expected: validation.d(), got: aux.d() });
    }
    Ok(())
}

/// Validation accuracy of a model trained on `data`; no data means every
/// validation row is predicted normal.
pub fn accuracy_utility<T: Scalar>(
    factory: &dyn ModelFactory<T>,
    data: Option<&LabeledDataset<T>>,
    validation: &LabeledDataset<T>,
    seed: u64,
) -> Result<f64> {
    match data {
        Some(data) => Ok(accuracy(factory.fit(data, seed)?.as_ref(), validation)),
        None => Ok(validation.labels().iter().filter(|&&y| y == 0).count() as f64 / validation.n() as f64),
    }
}

fn with_candidate<T: Scalar>(base: Option<&LabeledDataset<T>>, aux: &AuxiliarySet<T>, row: usize) -> Result<LabeledDataset<T>> {
    let x = aux.features().slice(ndarray::s![row..row + 1, ..]).to_owned();
    match base {
        Some(base) => base.with_appended(x.view(), 1),
        None => LabeledDataset::new(x, vec![1]),
    }
}

/// Leave-one-in: `U(train + x) - U(train)` with validation accuracy as `U`.
pub fn eval_loo<T: Scalar>(
    train: &LabeledDataset<T>,
    aux: &AuxiliarySet<T>,
    validation: &LabeledDataset<T>,
    factory: &dyn ModelFactory<T>,
    seed: u64,
) -> Result<EvaluatorResult> {
    timed("loo", || {
        require_validation(validation, aux)?;
        let utility_seed = seeding::stream(seed, "utility");
        let base = accuracy_utility(factory, Some(train), validation, utility_seed)?;
        (0..aux.len())
            .into_par_iter()
            .map(|r| {
                let data = with_candidate(Some(train), aux, r)?;
                Ok(accuracy_utility(factory, Some(&data), validation, utility_seed)? - base)
            })
            .collect()
    })
}

/// Banzhaf estimate over explicit training subsets (row index lists).
pub fn banzhaf_with_subsets<T: Scalar>(
    train: &LabeledDataset<T>,
    aux: &AuxiliarySet<T>,
    validation: &LabeledDataset<T>,
    factory: &dyn ModelFactory<T>,
    subsets: &[Vec<usize>],
    seed: u64,
) -> Result<Vec<f64>> {
    if subsets.is_empty() {
        return Err(Error::invalid("Banzhaf estimate needs at least one subset"));
    }
    require_validation(validation, aux)?;
    let utility_seed = seeding::stream(seed, "utility");
    let bases: Vec<Option<LabeledDataset<T>>> = subsets
        .iter()
        .map(|s| if s.is_empty() { Ok(None) } else { train.select(s).map(Some) })
        .collect::<Result<_>>()?;
    let base_utility: Vec<f64> = bases
        .par_iter()
        .map(|b| accuracy_utility(factory, b.as_ref(), validation, utility_seed))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..aux.len()).flat_map(|r| (0..subsets.len()).map(move |t| (r, t))).collect();
    let gains: Vec<f64> = jobs
        .par_iter()
        .map(|&(r, t)| {
            let data = with_candidate(bases[t].as_ref(), aux, r)?;
            Ok(accuracy_utility(factory, Some(&data), validation, utility_seed)? - base_utility[t])
        })
        .collect::<Result<_>>()?;
    Ok(gains.chunks(subsets.len()).map(|g| g.iter().sum::<f64>() / subsets.len() as f64).collect())
}

/// Training subsets with each row included independently with probability
/// one half.
pub fn banzhaf_subsets(n: usize, samples: usize, seed: u64) -> Vec<Vec<usize>> {
    let root = seeding::stream(seed, "databanzhaf");
    (0..samples)
        .map(|t| {
            let mut rng = seeding::rng(seeding::sub_seed(root, t as u64));
            (0..n).filter(|_| rng.gen_bool(0.5)).collect()
        })
        .collect()
}

/// Monte-Carlo Banzhaf value of adding each candidate.
pub fn eval_data_banzhaf<T: Scalar>(
    train: &LabeledDataset<T>,
    aux: &AuxiliarySet<T>,
    validation: &LabeledDataset<T>,
    factory: &dyn ModelFactory<T>,
    samples: usize,
    seed: u64,
) -> Result<EvaluatorResult> {
    timed("databanzhaf", || {
        if samples == 0 {
            return Err(Error::invalid("Banzhaf needs at least one sampled subset"));
        }
        let subsets = banzhaf_subsets(train.n(), samples, seed);
        banzhaf_with_subsets(train, aux, validation, factory, &subsets, seed)
    })
}

/// Label agreement between each validation row and its `k` nearest rows of
/// `data`, averaged over `N_val * k`. Distance ties go to the lower index.
pub fn knn_utility<T: Scalar>(data: &LabeledDataset<T>, validation: &LabeledDataset<T>, k: usize) -> f64 {
    let mut total = 0usize;
    for v in 0..validation.n() {
        let mut order: Vec<(T, usize)> =
            (0..data.n()).map(|i| (euclidean(validation.row_slice(v), data.row_slice(i)), i)).collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
        total += order.iter().take(k).filter(|&&(_, i)| data.labels()[i] == validation.labels()[v]).count();
    }
    total as f64 / (validation.n() * k) as f64
}

/// `U_knn(train + x) - U_knn(train)`, computed from each validation row's
/// current k-th neighbor.
pub fn eval_knn_shap<T: Scalar>(
    train: &LabeledDataset<T>,
    aux: &AuxiliarySet<T>,
    validation: &LabeledDataset<T>,
    k: usize,
    _seed: u64,
) -> Result<EvaluatorResult> {
    timed("knnshap", || {
        if k == 0 || k > train.n() + 1 {
            return Err(Error::invalid(format!("kNN utility k={k} needs 1 <= k <= {}", train.n() + 1)));
        }
        require_validation(validation, aux)?;
        // Per validation row: distance to its k-th neighbor (None when fewer
        // than k rows exist) and whether that neighbor agrees with it.
        let kth: Vec<(Option<T>, bool)> = (0..validation.n())
            .into_par_iter()
            .map(|v| {
                let mut order: Vec<(T, usize)> =
                    (0..train.n()).map(|i| (euclidean(validation.row_slice(v), train.row_slice(i)), i)).collect();
                order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
                match order.get(k - 1) {
                    Some(&(dist, i)) => (Some(dist), train.labels()[i] == validation.labels()[v]),
                    None => (None, false),
                }
            })
            .collect();
        let denom = (validation.n() * k) as f64;
        Ok((0..aux.len())
            .into_par_iter()
            .map(|r| {
                let x = aux.row_slice(r);
                let mut delta = 0i64;
                for (v, &(kth_dist, kth_agrees)) in kth.iter().enumerate() {
                    // The candidate sorts after every training row at equal distance.
                    let enters = kth_dist.is_none_or(|d| euclidean(validation.row_slice(v), x) < d);
                    if enters {
                        delta += i64::from(validation.labels()[v] == 1) - i64::from(kth_agrees);
                    }
                }
                delta as f64 / denom
            })
            .collect())
    })
}

/// Out-of-bag correctness of predicting label 1: `(out_of_bag,
/// predicted_label)` per bootstrap. `None` when never out of bag.
pub fn oob_score(draws: &[(bool, u8)]) -> Option<f64> {
    let oob = draws.iter().filter(|d| d.0).count();
    if oob == 0 {
        return None;
    }
    Some(draws.iter().filter(|d| d.0 && d.1 == 1).count() as f64 / oob as f64)
}

/// DataOob with `models` depth-limited trees on bootstraps of `train + x`.
/// Bootstrap index draws are shared across candidates (the candidate always
/// occupies the last index), so a tree that leaves the candidate out of bag
/// is the same tree for every candidate.
pub fn eval_data_oob<T: Scalar>(
    train: &LabeledDataset<T>,
    aux: &AuxiliarySet<T>,
    models: usize,
    max_depth: usize,
    seed: u64,
) -> Result<EvaluatorResult> {
    timed("dataoob", || {
        if models == 0 {
            return Err(Error::invalid("DataOob needs at least one model"));
        }
        if !aux.is_empty() && aux.d() != train.d() {
            return Err(Error::DimensionMismatch { expected: train.d(), got: aux.d() });
        }
        let n = train.n();
        let root = seeding::stream(seed, "dataoob");
        let learners: Vec<Option<Box<dyn Classifier<T>>>> = (0..models)
            .into_par_iter()
            .map(|b| {
                let draw_seed = seeding::sub_seed(root, b as u64);
                let mut rng = seeding::rng(draw_seed);
                let rows: Vec<usize> = (0..=n).map(|_| rng.gen_range(0..=n)).collect();
                if rows.contains(&n) {
                    return Ok(None);
                }
                let data = train.select(&rows)?;
                let tree = fit_forest(&data, &ForestConfig::weak_learner(max_depth), draw_seed)?;
                Ok(Some(Box::new(tree) as Box<dyn Classifier<T>>))
            })
            .collect::<Result<_>>()?;
        Ok((0..aux.len())
            .map(|r| {
                let draws: Vec<(bool, u8)> = learners
                    .iter()
                    .map(|l| match l {
                        Some(l) => (true, l.predict(aux.row_slice(r))),
                        None => (false, 0),
                    })
                    .collect();
                oob_score(&draws).unwrap_or_else(|| {
                    log::warn!("candidate {r} never out of bag in {models} bootstraps; score set to 0");
                    0.0
                })
            })
            .collect())
    })
}

/// Scores that need no retraining: random, rarity at a fixed k, and the
/// fitted pipeline's components.
pub fn eval_simple<T: Scalar>(
    method: Method,
    pipeline: &EapPipeline<T>,
    aux: &AuxiliarySet<T>,
    rarity_k: usize,
    seed: u64,
) -> Result<EvaluatorResult> {
    timed(method.as_str(), || match method {
        Method::Random => {
            let mut rng = seeding::rng(seeding::stream(seed, "random"));
            Ok((0..aux.len()).map(|_| rng.gen::<f64>()).collect())
        }
        Method::Rarity => {
            let n = pipeline.rarity().n();
            let k = rarity_k.clamp(1, n.saturating_sub(1).max(1));
            (0..aux.len())
                .into_par_iter()
                .map(|r| Ok(pipeline.rarity().rarity_score(aux.row_slice(r), k)?.to_f64_lossy()))
                .collect()
        }
        Method::Eap | Method::Px | Method::Pyx | Method::PyxPlusNpx => {
            let n = pipeline.n() as f64;
            Ok(pipeline
                .score_set(aux)?
                .into_iter()
                .map(|c| match method {
                    Method::Eap => c.phi,
                    Method::Px => c.density,
                    Method::Pyx => c.conditional_prob,
                    _ => c.conditional_prob + n * c.density * c.density,
                })
                .collect())
        }
        other => Err(Error::invalid(format!("{other} is not a simple evaluator"))),
    })
}

/// Everything an evaluator may need for one experiment.
pub struct EvaluationContext<'a, T> {
    pub train: &'a LabeledDataset<T>,
    pub aux: &'a AuxiliarySet<T>,
    pub validation: &'a LabeledDataset<T>,
    pub pipeline: &'a EapPipeline<T>,
    pub factory: &'a dyn ModelFactory<T>,
    pub params: EvaluatorParams,
    pub seed: u64,
}

/// Runs one registered method; the result holds `aux.len()` scores.
pub fn run_method<T: Scalar>(method: Method, ctx: &EvaluationContext<'_, T>) -> Result<EvaluatorResult> {
    let seed = seeding::stream(ctx.seed, method.as_str());
    let p = &ctx.params;
    let result = match method {
        Method::Loo => eval_loo(ctx.train, ctx.aux, ctx.validation, ctx.factory, seed),
        Method::KnnShap => eval_knn_shap(ctx.train, ctx.aux, ctx.validation, p.knn_k, seed),
        Method::DataOob => eval_data_oob(ctx.train, ctx.aux, p.oob_models, p.oob_max_depth, seed),
        Method::DataBanzhaf => {
            eval_data_banzhaf(ctx.train, ctx.aux, ctx.validation, ctx.factory, p.banzhaf_samples, seed)
        }
        simple => eval_simple(simple, ctx.pipeline, ctx.aux, p.rarity_k, seed),
    }?;
    debug_assert_eq!(result.scores.len(), ctx.aux.len());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic_benchmark, SyntheticConfig};
    use crate::downstream::{ForestFactory, NearestNeighborFactory};
    use crate::eap::EapConfig;
    use ndarray::{array, Array2};

    fn line(points: &[f64], labels: Vec<u8>) -> LabeledDataset<f64> {
        LabeledDataset::new(Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap(), labels).unwrap()
    }

    fn aux(points: &[f64]) -> AuxiliarySet<f64> {
        AuxiliarySet::from_features(Array2::from_shape_vec((points.len(), 1), points.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn registry_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("lava".parse::<Method>(), Err(Error::UnavailableMethod(_))));
        assert!(matches!("Inf".parse::<Method>(), Err(Error::UnavailableMethod(_))));
        assert!(matches!("svm".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert_eq!(parse_methods("eap, random").unwrap(), vec![Method::Eap, Method::Random]);
        assert!(parse_methods(" , ").is_err());
    }

    #[test]
    fn loo_rewards_covering_a_missed_anomaly() {
        // Validation anomaly at 5 is nearest to the training normal at 4.
        let train = line(&[0.0, 4.0, 20.0], vec![0, 0, 1]);
        let validation = line(&[0.5, 5.0], vec![0, 1]);
        let scores = eval_loo(&train, &aux(&[5.0]), &validation, &NearestNeighborFactory, 0).unwrap().scores;
        assert_eq!(scores, vec![0.5]);
        let direct = accuracy_utility(&NearestNeighborFactory, Some(&line(&[0.0, 4.0, 20.0, 5.0], vec![0, 0, 1, 1])), &validation, 0).unwrap()
            - accuracy_utility(&NearestNeighborFactory, Some(&train), &validation, 0).unwrap();
        assert_eq!(scores[0], direct);
    }

    #[test]
    fn empty_aux_gives_empty_scores() {
        let train = line(&[0.0, 1.0], vec![0, 1]);
        let empty = AuxiliarySet::<f64>::empty(1);
        assert!(eval_loo(&train, &empty, &train, &NearestNeighborFactory, 0).unwrap().scores.is_empty());
        assert!(eval_knn_shap(&train, &empty, &train, 1, 0).unwrap().scores.is_empty());
        assert!(eval_data_oob(&train, &empty, 3, 4, 0).unwrap().scores.is_empty());
    }

    #[test]
    fn knn_shap_hand_example() {
        // k=1, one validation anomaly at 0; its neighbor is the normal at 1.
        let train = line(&[1.0, 5.0], vec![0, 1]);
        let validation = line(&[0.0], vec![1]);
        let scores = eval_knn_shap(&train, &aux(&[0.2, 30.0, 0.2]), &validation, 1, 0).unwrap().scores;
        assert_eq!(scores, vec![1.0, 0.0, 1.0]);
        assert!(eval_knn_shap(&train, &aux(&[0.2]), &validation, 4, 0).is_err());
    }

    #[test]
    fn knn_shap_matches_brute_force() {
        let (data, set) = generate_synthetic_benchmark::<f64>(
            &SyntheticConfig { n: 120, m: 20, aux_per_group: 8, ..SyntheticConfig::default() },
            3,
        )
        .unwrap();
        let validation = data.select(&(0..40).collect::<Vec<_>>()).unwrap();
        let train = data.select(&(40..120).collect::<Vec<_>>()).unwrap();
        for k in [1, 3, 10, 81] {
            let fast = eval_knn_shap(&train, &set, &validation, k, 0).unwrap().scores;
            let base = knn_utility(&train, &validation, k);
            for (r, &got) in fast.iter().enumerate() {
                let with = with_candidate(Some(&train), &set, r).unwrap();
                let expected = knn_utility(&with, &validation, k) - base;
                assert!((got - expected).abs() < 1e-12, "k={k} row={r}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn oob_formula() {
        assert_eq!(oob_score(&[(true, 1)]), Some(1.0));
        assert_eq!(oob_score(&[(true, 1), (false, 0), (true, 0)]), Some(0.5));
        assert_eq!(oob_score(&[(false, 1)]), None);
    }

    #[test]
    fn data_oob_deterministic_and_bounded() {
        let train = line(&[0.0, 0.5, 1.0, 1.5, 9.0, 9.5], vec![0, 0, 0, 0, 1, 1]);
        let set = aux(&[9.2, 0.7, 9.2]);
        let a = eval_data_oob(&train, &set, 20, 4, 5).unwrap().scores;
        assert_eq!(a, eval_data_oob(&train, &set, 20, 4, 5).unwrap().scores);
        assert!(a.iter().all(|s| (0.0..=1.0).contains(s)));
        assert_eq!(a[0], a[2]);
        assert!(a[0] > a[1]);
    }

    #[test]
    fn banzhaf_full_subset_equals_loo() {
        let (data, set) = generate_synthetic_benchmark::<f64>(
            &SyntheticConfig { n: 120, m: 20, aux_per_group: 4, ..SyntheticConfig::default() },
            8,
        )
        .unwrap();
        let factory = ForestFactory(ForestConfig { tree_count: 5, ..ForestConfig::default() });
        let all: Vec<usize> = (0..data.n()).collect();
        let banzhaf = banzhaf_with_subsets(&data, &set, &data, &factory, &[all], 13).unwrap();
        let loo = eval_loo(&data, &set, &data, &factory, 13).unwrap().scores;
        assert_eq!(banzhaf, loo);
    }

    #[test]
    fn banzhaf_handles_empty_subset() {
        let train = line(&[0.0, 1.0, 9.0], vec![0, 0, 1]);
        let validation = line(&[0.0, 9.0], vec![0, 1]);
        // Empty base predicts all normal (0.5); a lone candidate predicts all anomalous (0.5).
        let s = banzhaf_with_subsets(&train, &aux(&[9.0]), &validation, &NearestNeighborFactory, &[vec![]], 0).unwrap();
        assert_eq!(s, vec![0.0]);
        let a = eval_data_banzhaf(&train, &aux(&[9.0, 0.0]), &validation, &NearestNeighborFactory, 8, 2).unwrap();
        let b = eval_data_banzhaf(&train, &aux(&[9.0, 0.0]), &validation, &NearestNeighborFactory, 8, 2).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn simple_scores() {
        let (data, set) = generate_synthetic_benchmark::<f64>(
            &SyntheticConfig { n: 200, m: 40, aux_per_group: 5, ..SyntheticConfig::default() },
            1,
        )
        .unwrap();
        let pipeline = EapPipeline::fit(&data, &EapConfig::default(), 1).unwrap();
        let r1 = eval_simple(Method::Random, &pipeline, &set, 10, 4).unwrap().scores;
        assert_eq!(r1, eval_simple(Method::Random, &pipeline, &set, 10, 4).unwrap().scores);
        assert!(r1.iter().all(|v| (0.0..1.0).contains(v)));
        let px = eval_simple(Method::Px, &pipeline, &set, 10, 0).unwrap().scores;
        let pyx = eval_simple(Method::Pyx, &pipeline, &set, 10, 0).unwrap().scores;
        let combo = eval_simple(Method::PyxPlusNpx, &pipeline, &set, 10, 0).unwrap().scores;
        for i in 0..set.len() {
            if px[i] == 0.0 {
                assert_eq!(combo[i], pyx[i]);
            }
            assert!(combo[i] >= pyx[i]);
        }
        assert!(px.contains(&0.0));
        assert!(eval_simple(Method::Loo, &pipeline, &set, 10, 0).is_err());
    }

    #[test]
    fn run_method_returns_one_score_per_row() {
        let train = line(&[0.0, 0.4, 0.8, 1.2, 9.0, 9.4], vec![0, 0, 0, 0, 1, 1]);
        let set = AuxiliarySet::from_features(array![[9.1], [0.3], [50.0]]).unwrap();
        let pipeline = EapPipeline::fit(&train, &EapConfig::default(), 0).unwrap();
        let factory = ForestFactory(ForestConfig { tree_count: 3, ..ForestConfig::default() });
        let ctx = EvaluationContext {
            train: &train,
            aux: &set,
            validation: &train,
            pipeline: &pipeline,
            factory: &factory,
            params: EvaluatorParams { knn_k: 3, oob_models: 5, banzhaf_samples: 3, ..EvaluatorParams::default() },
            seed: 9,
        };
        for m in Method::ALL {
            let r = run_method(m, &ctx).unwrap();
            assert_eq!(r.method, m.as_str());
            assert_eq!(r.scores.len(), 3);
        }
    }
}
