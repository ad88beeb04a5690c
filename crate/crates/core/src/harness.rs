//! Experiment orchestration: repeated split / auxiliary-set / fit / evaluate
//! runs, the prior sweep, and report files.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_auxiliary_set, generate_synthetic_benchmark, load_auxiliary_csv, load_csv, split_experiment, LabeledDataset,
    SplitSpec, SyntheticConfig,
};
use crate::downstream::{default_step, learning_curve, ForestConfig, ForestFactory, LearningCurve};
use crate::eap::{EapConfig, EapPipeline, PriorSpec};
use crate::error::{Error, Result};
use crate::evaluators::{run_method, EvaluationContext, EvaluatorParams, Method};
use crate::metrics::{auc_quality, aulc, final_accuracy, rank_values, Direction, MetricTable};
use crate::seeding;

/// Environment variable holding the worker-pool size.
pub const WORKERS_ENV: &str = "EAP_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// Generated benchmark; its unrealistic rows form the foreign pool.
    Synthetic {
        name: String,
        #[serde(default)]
        config: SyntheticConfig,
        #[serde(default)]
        generator_seed: u64,
    },
    /// Labeled CSV plus other datasets' CSVs used as the foreign pool.
    Csv {
        name: String,
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
        foreign: Vec<PathBuf>,
    },
}

fn default_label_column() -> String {
    "label".to_string()
}

impl DataSource {
    pub fn name(&self) -> &str {
        match self {
            DataSource::Synthetic { name, .. } | DataSource::Csv { name, .. } => name,
        }
    }

    /// The labeled dataset and the foreign pool.
    pub fn load(&self) -> Result<(LabeledDataset<f64>, Vec<LabeledDataset<f64>>)> {
        match self {
            DataSource::Synthetic { config, generator_seed, .. } => {
                let (data, aux) = generate_synthetic_benchmark::<f64>(config, *generator_seed)?;
                let unrealistic: Vec<usize> = (0..aux.len())
                    .filter(|&i| aux.category().is_some_and(|c| c[i] == crate::dataset::Category::Unrealistic))
                    .collect();
                Ok((data, vec![aux.select(&unrealistic).to_anomalies()?]))
            }
            DataSource::Csv { path, label_column, foreign, .. } => {
                if foreign.is_empty() {
                    return Err(Error::invalid(format!("dataset {} lists no foreign datasets", self.name())));
                }
                let data = load_csv(path, label_column)?;
                let pool = foreign
                    .iter()
                    .map(|p| load_auxiliary_csv::<f64>(p, label_column)?.to_anomalies())
                    .collect::<Result<_>>()?;
                Ok((data, pool))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub datasets: Vec<DataSource>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Fractions only; the seed field is replaced by each run's seed.
    pub split: SplitSpec,
    pub eap: EapConfig,
    pub evaluator: EvaluatorParams,
    pub downstream: ForestConfig,
    pub learning_curves: bool,
    pub forward_budget: f64,
    pub inverse_budget: f64,
    /// Learning-curve step; `None` picks it from the candidate count.
    pub step: Option<usize>,
    /// Cap on rows drawn from each foreign dataset.
    pub foreign_subsample: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: vec![DataSource::Synthetic {
                name: "synthetic".into(),
                config: SyntheticConfig::default(),
                generator_seed: 0,
            }],
            methods: vec![Method::Eap, Method::Random],
            seeds: (0..10).collect(),
            split: SplitSpec::default(),
            eap: EapConfig::default(),
            evaluator: EvaluatorParams::default(),
            downstream: ForestConfig::default(),
            learning_curves: true,
            forward_budget: 1.0 / 3.0,
            inverse_budget: 2.0 / 3.0,
            step: None,
            foreign_subsample: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::invalid("no datasets configured"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods configured"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("no seeds configured"));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(DataSource::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("dataset names must be unique"));
        }
        let mut methods = self.methods.clone();
        methods.sort_by_key(|m| m.as_str());
        if methods.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("methods listed twice"));
        }
        self.split.validate()?;
        for (name, b) in [("forward", self.forward_budget), ("inverse", self.inverse_budget)] {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::invalid(format!("{name} budget {b} outside (0, 1]")));
            }
        }
        if self.step == Some(0) {
            return Err(Error::invalid("learning-curve step must be positive"));
        }
        for ds in &self.datasets {
            if let DataSource::Synthetic { config, .. } = ds {
                config.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub auc_qlt: f64,
    pub aulc_g: Option<f64>,
    pub acc_g: Option<f64>,
    pub aulc_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    /// `None` on success.
    pub error: Option<String>,
    pub scores: Vec<f64>,
    pub metrics: Option<SeedMetrics>,
    pub forward_curve: Option<LearningCurve>,
    pub inverse_curve: Option<LearningCurve>,
}

impl MethodRun {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub auc_qlt: Option<f64>,
    pub aulc_g: Option<f64>,
    pub acc_g: Option<f64>,
    pub aulc_p: Option<f64>,
    pub rank_auc_qlt: Option<f64>,
    pub rank_aulc_g: Option<f64>,
    pub rank_acc_g: Option<f64>,
    pub rank_aulc_p: Option<f64>,
    /// Mean of the available metric ranks.
    pub avg_rank: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub per_seed: Vec<MethodRun>,
    pub aggregate: Vec<AggregateRow>,
    /// Wall-clock per run; kept out of the JSON so reports stay reproducible.
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.per_seed.iter().filter(|r| !r.succeeded()).count()
    }

    pub fn row(&self, method: Method) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.method == method)
    }

    /// Aggregate means and ranks as a printable table.
    pub fn table(&self) -> MetricTable {
        let columns = ["AUC_qlt", "AULC_g", "ACC_g", "AULC_p", "Avg. Rank"];
        let mut table = MetricTable::new(
            self.aggregate.iter().map(|r| r.method.to_string()).collect(),
            columns.iter().map(|c| c.to_string()).collect(),
        );
        for r in &self.aggregate {
            for (c, v) in columns.iter().zip([r.auc_qlt, r.aulc_g, r.acc_g, r.aulc_p, r.avg_rank]) {
                table.set(r.method.as_str(), c, v.unwrap_or(f64::NAN)).expect("known cell");
            }
        }
        table
    }
}

/// Candidate order by descending score, ties to the lower index.
pub fn ranking_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Candidate order by ascending score, ties to the lower index.
pub fn ranking_ascending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order
}

struct Job<'a> {
    dataset: &'a str,
    data: &'a LabeledDataset<f64>,
    foreign: &'a [LabeledDataset<f64>],
    seed: u64,
}

/// Scores, metrics, optional (forward, inverse) curves and seconds.
type MethodOutput = (Vec<f64>, SeedMetrics, Option<(LearningCurve, LearningCurve)>, f64);

fn run_job(config: &ExperimentConfig, job: &Job<'_>) -> Result<Vec<(MethodRun, Option<f64>)>> {
    let split = split_experiment(job.data, &SplitSpec { seed: job.seed, ..config.split })?;
    let (aux, train) = build_auxiliary_set(
        &split.train,
        &split.aux_realistic,
        job.foreign,
        config.foreign_subsample,
        seeding::stream(job.seed, "auxiliary-set"),
    )?;
    let quality = aux.quality_tags().ok_or_else(|| Error::invalid("auxiliary set lacks quality tags"))?;
    let pipeline = EapPipeline::fit(&train, &config.eap, seeding::stream(job.seed, "pipeline"))?;
    let factory = ForestFactory(config.downstream);
    let ctx = EvaluationContext {
        train: &train,
        aux: &aux,
        validation: &train,
        pipeline: &pipeline,
        factory: &factory,
        params: config.evaluator,
        seed: seeding::stream(job.seed, "evaluators"),
    };
    let curve_seed = seeding::stream(job.seed, "learning-curves");
    let step = config.step.unwrap_or_else(|| default_step(aux.len()));

    let evaluate = |method: Method| -> Result<MethodOutput> {
        let result = run_method(method, &ctx)?;
        if let Some(s) = result.scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("{method} produced score {s}")));
        }
        let auc = auc_quality(&result.scores, &quality)?;
        if !config.learning_curves {
            let metrics = SeedMetrics { auc_qlt: auc, aulc_g: None, acc_g: None, aulc_p: None };
            return Ok((result.scores, metrics, None, result.seconds));
        }
        let forward = learning_curve(
            &train,
            &aux,
            &ranking_descending(&result.scores),
            &split.test,
            config.forward_budget,
            step,
            &factory,
            curve_seed,
        )?;
        let inverse = learning_curve(
            &train,
            &aux,
            &ranking_ascending(&result.scores),
            &split.test,
            config.inverse_budget,
            step,
            &factory,
            curve_seed,
        )?;
        let metrics = SeedMetrics {
            auc_qlt: auc,
            aulc_g: Some(aulc(&forward)?),
            acc_g: Some(final_accuracy(&forward)?),
            aulc_p: Some(aulc(&inverse)?),
        };
        Ok((result.scores, metrics, Some((forward, inverse)), result.seconds))
    };

    Ok(config
        .methods
        .iter()
        .map(|&method| {
            let base = MethodRun {
                dataset: job.dataset.to_string(),
                method,
                seed: job.seed,
                error: None,
                scores: Vec::new(),
                metrics: None,
                forward_curve: None,
                inverse_curve: None,
            };
            match evaluate(method) {
                Ok((scores, metrics, curves, seconds)) => {
                    let (forward_curve, inverse_curve) = curves.unzip();
                    (MethodRun { scores, metrics: Some(metrics), forward_curve, inverse_curve, ..base }, Some(seconds))
                }
                Err(e) => {
                    log::warn!("{method} failed on {} seed {}: {e}", job.dataset, job.seed);
                    (MethodRun { error: Some(e.to_string()), ..base }, None)
                }
            }
        })
        .collect())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Per-method means over successful runs, and ranks averaged over the
/// (dataset, seed) experiments in which every method succeeded.
pub fn aggregate(methods: &[Method], runs: &[MethodRun]) -> Vec<AggregateRow> {
    type Getter = fn(&SeedMetrics) -> Option<f64>;
    let getters: [(Getter, Direction); 4] = [
        (|m| Some(m.auc_qlt), Direction::HigherIsBetter),
        (|m| m.aulc_g, Direction::HigherIsBetter),
        (|m| m.acc_g, Direction::HigherIsBetter),
        (|m| m.aulc_p, Direction::LowerIsBetter),
    ];
    // Runs are grouped per experiment, in config method order.
    let experiments: Vec<&[MethodRun]> = runs.chunks(methods.len()).collect();
    let mut rank_sums = vec![[0.0f64; 4]; methods.len()];
    let mut rank_counts = [0usize; 4];
    for exp in &experiments {
        let Some(metrics) = exp.iter().map(|r| r.metrics).collect::<Option<Vec<SeedMetrics>>>() else {
            continue;
        };
        for (g, (get, direction)) in getters.iter().enumerate() {
            let Some(values) = metrics.iter().map(get).collect::<Option<Vec<f64>>>() else {
                continue;
            };
            for (sum, r) in rank_sums.iter_mut().zip(rank_values(&values, *direction)) {
                sum[g] += r;
            }
            rank_counts[g] += 1;
        }
    }
    methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let mine: Vec<&MethodRun> = experiments.iter().map(|e| &e[i]).collect();
            let ok: Vec<SeedMetrics> = mine.iter().filter_map(|r| r.metrics).collect();
            let ranks: Vec<Option<f64>> =
                (0..4).map(|g| (rank_counts[g] > 0).then(|| rank_sums[i][g] / rank_counts[g] as f64)).collect();
            AggregateRow {
                method,
                completed: ok.len(),
                failed: mine.len() - ok.len(),
                auc_qlt: mean(ok.iter().map(|m| m.auc_qlt)),
                aulc_g: mean(ok.iter().filter_map(|m| m.aulc_g)),
                acc_g: mean(ok.iter().filter_map(|m| m.acc_g)),
                aulc_p: mean(ok.iter().filter_map(|m| m.aulc_p)),
                rank_auc_qlt: ranks[0],
                rank_aulc_g: ranks[1],
                rank_acc_g: ranks[2],
                rank_aulc_p: ranks[3],
                avg_rank: mean(ranks.iter().flatten().copied()),
            }
        })
        .collect()
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        },
    }
}

/// Runs every (dataset, seed) experiment, honouring the worker-count
/// environment variable.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match workers_from_env()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("worker pool: {e}")))?
            .install(|| run_experiment_in_pool(config)),
        None => run_experiment_in_pool(config),
    }
}

fn run_experiment_in_pool(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let loaded: Vec<(LabeledDataset<f64>, Vec<LabeledDataset<f64>>)> =
        config.datasets.iter().map(DataSource::load).collect::<Result<_>>()?;
    let jobs: Vec<Job<'_>> = config
        .datasets
        .iter()
        .zip(&loaded)
        .flat_map(|(ds, (data, foreign))| {
            config.seeds.iter().map(move |&seed| Job { dataset: ds.name(), data, foreign, seed })
        })
        .collect();
    let results: Vec<Vec<(MethodRun, Option<f64>)>> = jobs
        .par_iter()
        .map(|job| {
            run_job(config, job).inspect_err(|e| log::error!("dataset {} seed {}: {e}", job.dataset, job.seed))
        })
        .collect::<Result<_>>()?;
    let mut per_seed = Vec::new();
    let mut timings = Vec::new();
    for (run, seconds) in results.into_iter().flatten() {
        if let Some(seconds) = seconds {
            timings.push(Timing { dataset: run.dataset.clone(), method: run.method, seed: run.seed, seconds });
        }
        per_seed.push(run);
    }
    let aggregate = aggregate(&config.methods, &per_seed);
    Ok(ExperimentReport { config: config.clone(), per_seed, aggregate, timings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepVariant {
    pub name: String,
    pub prior: PriorSpec,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub variants: Vec<SweepVariant>,
    /// Columns `rAUC_qlt`, `rACC_g` and `Avg. Rank`, one row per variant.
    pub ranks: MetricTable,
}

/// Runs the EAP pipeline once per `alpha0` (with `beta0 = 1 - alpha0`) plus
/// the contamination-rate default, then ranks the variants per experiment.
pub fn prior_sweep(config: &ExperimentConfig, alpha0_grid: &[f64]) -> Result<SweepReport> {
    for &a in alpha0_grid {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::invalid(format!("sweep value alpha0={a} outside (0, 0.5)")));
        }
    }
    let mut priors: Vec<(String, PriorSpec)> =
        alpha0_grid.iter().map(|&a| (format!("eap(alpha0={a})"), PriorSpec::Alpha0(a))).collect();
    priors.push(("eap(m/n)".to_string(), PriorSpec::Contamination));
    let variants: Vec<SweepVariant> = priors
        .into_iter()
        .map(|(name, prior)| {
            let mut cfg = config.clone();
            cfg.methods = vec![Method::Eap];
            cfg.eap.prior = prior;
            Ok(SweepVariant { name, prior, report: run_experiment(&cfg)? })
        })
        .collect::<Result<_>>()?;

    let columns = ["rAUC_qlt", "rACC_g", "Avg. Rank"];
    let mut ranks = MetricTable::new(
        variants.iter().map(|v| v.name.clone()).collect(),
        columns.iter().map(|c| c.to_string()).collect(),
    );
    let experiments = variants[0].report.per_seed.len();
    let mut sums = vec![[0.0f64; 2]; variants.len()];
    let mut counts = [0usize; 2];
    for e in 0..experiments {
        let metrics: Option<Vec<SeedMetrics>> = variants.iter().map(|v| v.report.per_seed[e].metrics).collect();
        let Some(metrics) = metrics else { continue };
        let auc: Vec<f64> = metrics.iter().map(|m| m.auc_qlt).collect();
        for (s, r) in sums.iter_mut().zip(rank_values(&auc, Direction::HigherIsBetter)) {
            s[0] += r;
        }
        counts[0] += 1;
        if let Some(acc) = metrics.iter().map(|m| m.acc_g).collect::<Option<Vec<f64>>>() {
            for (s, r) in sums.iter_mut().zip(rank_values(&acc, Direction::HigherIsBetter)) {
                s[1] += r;
            }
            counts[1] += 1;
        }
    }
    for (v, s) in variants.iter().zip(&sums) {
        let r: Vec<Option<f64>> = (0..2).map(|g| (counts[g] > 0).then(|| s[g] / counts[g] as f64)).collect();
        ranks.set(&v.name, "rAUC_qlt", r[0].unwrap_or(f64::NAN))?;
        ranks.set(&v.name, "rACC_g", r[1].unwrap_or(f64::NAN))?;
        ranks.set(&v.name, "Avg. Rank", mean(r.iter().flatten().copied()).unwrap_or(f64::NAN))?;
    }
    Ok(SweepReport { variants, ranks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.display().to_string(), source },
        other => Error::Serialization(format!("{other:?}")),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Serialises the report as pretty JSON.
pub fn report_to_json<S: Serialize>(report: &S) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn write_metrics_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["dataset", "method", "seed", "status", "auc_qlt", "aulc_g", "acc_g", "aulc_p", "error"])
        .map_err(csv_err(path))?;
    for r in &report.per_seed {
        let m = r.metrics;
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.seed.to_string(),
            if r.succeeded() { "ok".into() } else { "failed".into() },
            fmt_opt(m.map(|m| m.auc_qlt)),
            fmt_opt(m.and_then(|m| m.aulc_g)),
            fmt_opt(m.and_then(|m| m.acc_g)),
            fmt_opt(m.and_then(|m| m.aulc_p)),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_curves_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["dataset", "method", "seed", "direction", "c", "accuracy"]).map_err(csv_err(path))?;
    for r in &report.per_seed {
        for (direction, curve) in [("forward", &r.forward_curve), ("inverse", &r.inverse_curve)] {
            let Some(curve) = curve else { continue };
            for (c, acc) in curve.xs.iter().zip(&curve.ys) {
                w.write_record([
                    r.dataset.clone(),
                    r.method.to_string(),
                    r.seed.to_string(),
                    direction.to_string(),
                    c.to_string(),
                    acc.to_string(),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn write_timings_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["dataset", "method", "seed", "seconds"]).map_err(csv_err(path))?;
    for t in &report.timings {
        w.write_record([t.dataset.clone(), t.method.to_string(), t.seed.to_string(), t.seconds.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the report to `path` in `format`, plus `<stem>.curves.csv` and
/// `<stem>.timings.csv` next to it. Returns every path written.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<Vec<PathBuf>> {
    match format {
        ReportFormat::Json => {
            let json = report_to_json(report)?;
            let mut f = File::create(path).map_err(io_err(path))?;
            f.write_all(json.as_bytes()).and_then(|_| f.write_all(b"\n")).map_err(io_err(path))?;
        }
        ReportFormat::Csv => write_metrics_csv(report, path)?,
    }
    let curves = companion(path, "curves");
    write_curves_csv(report, &curves)?;
    let timings = companion(path, "timings");
    write_timings_csv(report, &timings)?;
    Ok(vec![path.to_path_buf(), curves, timings])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            datasets: vec![DataSource::Synthetic {
                name: "small".into(),
                config: SyntheticConfig { n: 200, m: 40, aux_per_group: 16, ..SyntheticConfig::default() },
                generator_seed: 3,
            }],
            seeds: vec![0, 1],
            downstream: ForestConfig { tree_count: 5, ..ForestConfig::default() },
            step: Some(4),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn rankings_break_ties_by_index() {
        assert_eq!(ranking_descending(&[0.2, 0.9, 0.2, 0.5]), vec![1, 3, 0, 2]);
        assert_eq!(ranking_ascending(&[0.2, 0.9, 0.2, 0.5]), vec![0, 2, 3, 1]);
    }

    #[test]
    fn one_method_one_seed_gives_one_row() {
        let cfg = ExperimentConfig { methods: vec![Method::Eap], seeds: vec![5], ..small_config() };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.per_seed.len(), 1);
        assert_eq!(report.aggregate.len(), 1);
        let row = &report.aggregate[0];
        assert_eq!(row.rank_auc_qlt, Some(1.0));
        assert_eq!(row.completed, 1);
        let curve = report.per_seed[0].forward_curve.as_ref().unwrap();
        assert_eq!(curve.xs[0], 0);
        assert_eq!(*curve.xs.last().unwrap(), 16);
    }

    #[test]
    fn failing_method_is_isolated() {
        let mut cfg = ExperimentConfig { methods: vec![Method::Eap, Method::KnnShap], ..small_config() };
        cfg.evaluator.knn_k = 100_000;
        cfg.learning_curves = false;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.failures(), 2);
        let eap_rows: Vec<_> = report.per_seed.iter().filter(|r| r.method == Method::Eap).collect();
        assert!(eap_rows.iter().all(|r| r.succeeded() && r.metrics.is_some()));
        let knn = report.row(Method::KnnShap).unwrap();
        assert_eq!((knn.completed, knn.failed), (0, 2));
        assert_eq!(knn.auc_qlt, None);
        assert!(report.per_seed.iter().any(|r| r.error.as_deref().is_some_and(|e| e.contains("k=100000"))));
        let plain = run_experiment(&ExperimentConfig { methods: vec![Method::Eap], ..cfg.clone() }).unwrap();
        assert_eq!(plain.per_seed[0].scores, eap_rows[0].scores);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(run_experiment(&ExperimentConfig { methods: vec![], ..small_config() }).is_err());
        assert!(run_experiment(&ExperimentConfig { seeds: vec![], ..small_config() }).is_err());
        assert!(run_experiment(&ExperimentConfig { forward_budget: 0.0, ..small_config() }).is_err());
        assert!(prior_sweep(&small_config(), &[0.6]).is_err());
    }

    #[test]
    fn sweep_counts_variants() {
        let cfg = ExperimentConfig { seeds: vec![0, 1, 2], learning_curves: false, ..small_config() };
        let sweep = prior_sweep(&cfg, &[0.1]).unwrap();
        assert_eq!(sweep.variants.len(), 2);
        assert_eq!(sweep.ranks.methods, vec!["eap(alpha0=0.1)".to_string(), "eap(m/n)".to_string()]);
        assert!(sweep.ranks.render("Evaluator").starts_with("Evaluator | rAUC_qlt | rACC_g | Avg. Rank\n"));
    }

    #[test]
    fn json_round_trip_and_csv_counts() {
        let cfg = ExperimentConfig { methods: vec![Method::Eap, Method::Random, Method::Px], ..small_config() };
        let report = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let json_path = dir.path().join("report.json");
        let written = emit_report(&report, ReportFormat::Json, &json_path).unwrap();
        assert_eq!(written.len(), 3);
        let parsed: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(parsed.aggregate, report.aggregate);
        assert_eq!(parsed.per_seed, report.per_seed);

        let csv_path = dir.path().join("report.csv");
        emit_report(&report, ReportFormat::Csv, &csv_path).unwrap();
        let rows = csv::Reader::from_path(&csv_path).unwrap().records().count();
        assert_eq!(rows, 3 * 2);
        let mut curves = csv::Reader::from_path(dir.path().join("report.curves.csv")).unwrap();
        assert_eq!(
            curves.headers().unwrap().iter().collect::<Vec<_>>(),
            vec!["dataset", "method", "seed", "direction", "c", "accuracy"]
        );
        let timing_rows = csv::Reader::from_path(dir.path().join("report.timings.csv")).unwrap().records().count();
        assert_eq!(timing_rows, 6);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let report = run_experiment(&ExperimentConfig {
            methods: vec![Method::Random],
            seeds: vec![0],
            learning_curves: false,
            ..small_config()
        })
        .unwrap();
        let bad = Path::new("/nonexistent-dir/for/report.json");
        assert!(matches!(emit_report(&report, ReportFormat::Json, bad), Err(Error::Io { .. })));
    }
}
