mod settings;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eap_core::dataset::{
    generate_synthetic_benchmark, load_auxiliary_csv, load_csv, write_auxiliary_csv, write_dataset_csv,
    SyntheticConfig,
};
use eap_core::downstream::{ForestConfig, ForestFactory};
use eap_core::evaluators::{parse_methods, run_method, EvaluationContext, EvaluatorParams};
use eap_core::harness::{
    emit_report, prior_sweep, report_to_json, run_experiment, workers_from_env, DataSource, ExperimentConfig,
    ReportFormat,
};
use eap_core::metrics::auc_quality;
use eap_core::{seeding, Error, Method, Pipeline, PriorSpec};

use settings::{ConfigError, Settings};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "eap", version, about = "Quality scores for auxiliary anomalies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score each auxiliary row against a labeled training set.
    Score(Settings),
    /// Run several evaluators on one auxiliary set; reports quality AUC when
    /// the set carries category or pseudo_quality columns.
    Evaluate(Settings),
    /// Repeated split / auxiliary-set / evaluation runs with learning curves.
    Benchmark(Settings),
    /// Compare EAP priors over a grid of alpha0 values.
    Sweep(Settings),
    /// Write the synthetic benchmark as CSV files into the `--out` directory.
    Generate(Settings),
}

enum Failure {
    Config(String),
    Data(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

/// Success, or success with some methods failed.
enum Outcome {
    Done,
    Partial(usize),
}

/// Method, scores, AUC against pseudo quality, error message.
type ScoreRow = (Method, Option<Vec<f64>>, Option<f64>, Option<String>);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("warning: {n} method run(s) failed; see the report");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(command: Command) -> Result<Outcome, Failure> {
    if let Some(n) = workers_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("worker pool: {e}")))?;
    }
    match command {
        Command::Score(s) => score(s.resolve()?),
        Command::Evaluate(s) => evaluate(s.resolve()?),
        Command::Benchmark(s) => benchmark(s.resolve()?),
        Command::Sweep(s) => sweep(s.resolve()?),
        Command::Generate(s) => generate(s.resolve()?),
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, Failure> {
    value.as_ref().ok_or_else(|| Failure::Config(format!("missing --{flag}")))
}

fn format_of(s: &Settings, default: ReportFormat) -> Result<ReportFormat, Failure> {
    match s.format.as_deref() {
        Some(f) => Ok(f.parse()?),
        None => Ok(default),
    }
}

fn eap_config(s: &Settings) -> eap_core::EapConfig {
    let mut cfg = eap_core::EapConfig::default();
    if let Some(a) = s.alpha0 {
        cfg.prior = PriorSpec::Alpha0(a);
    }
    if let Some(w) = s.blend_weight {
        cfg.detector.blend_weight = w;
    }
    if let Some(k) = s.detector_k {
        cfg.detector.k = k;
    }
    cfg
}

fn forest_config(s: &Settings) -> ForestConfig {
    let mut cfg = ForestConfig::default();
    if let Some(t) = s.trees {
        cfg.tree_count = t;
    }
    cfg
}

fn evaluator_params(s: &Settings) -> EvaluatorParams {
    let mut p = EvaluatorParams::default();
    if let Some(k) = s.knn_k {
        p.knn_k = k;
    }
    if let Some(b) = s.oob_models {
        p.oob_models = b;
    }
    if let Some(t) = s.banzhaf_samples {
        p.banzhaf_samples = t;
    }
    p
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Data(format!("stdout: {e}")))
        }
    }
}

fn to_csv(header: &[String], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Failure::Data(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Failure::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Data(e.to_string()))
}

fn score(s: Settings) -> Result<Outcome, Failure> {
    let train = load_csv::<f64>(require(&s.train, "train")?, s.label_column())?;
    let aux = load_auxiliary_csv::<f64>(require(&s.aux, "aux")?, s.label_column())?;
    let pipeline = Pipeline::fit(&train, &eap_config(&s), s.seed.unwrap_or(0))?;
    let components = pipeline.score_set(&aux)?;
    let text = match format_of(&s, ReportFormat::Csv)? {
        ReportFormat::Json => {
            serde_json::to_string_pretty(&components).map_err(|e| Failure::Data(e.to_string()))? + "\n"
        }
        ReportFormat::Csv => {
            let header: Vec<String> = ["row", "phi", "density", "conditional_prob", "pseudo_count", "pseudo_anomalies"]
                .map(String::from)
                .to_vec();
            let rows: Vec<Vec<String>> = components
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    vec![
                        i.to_string(),
                        c.phi.to_string(),
                        c.density.to_string(),
                        c.conditional_prob.to_string(),
                        c.pseudo_count.to_string(),
                        c.pseudo_anomalies.to_string(),
                    ]
                })
                .collect();
            to_csv(&header, &rows)?
        }
    };
    write_output(s.out.as_deref(), &text)?;
    Ok(Outcome::Done)
}

fn evaluate(s: Settings) -> Result<Outcome, Failure> {
    let methods = parse_methods(s.methods.as_deref().unwrap_or("eap,random,rarity,px,pyx,pyx_plus_npx"))?;
    let train = load_csv::<f64>(require(&s.train, "train")?, s.label_column())?;
    let aux = load_auxiliary_csv::<f64>(require(&s.aux, "aux")?, s.label_column())?;
    let seed = s.seed.unwrap_or(0);
    let pipeline = Pipeline::fit(&train, &eap_config(&s), seeding::stream(seed, "pipeline"))?;
    let factory = ForestFactory(forest_config(&s));
    let ctx = EvaluationContext {
        train: &train,
        aux: &aux,
        validation: &train,
        pipeline: &pipeline,
        factory: &factory,
        params: evaluator_params(&s),
        seed: seeding::stream(seed, "evaluators"),
    };
    let tags = aux.quality_tags();
    let mut results = Vec::new();
    let mut failed = 0;
    for &method in &methods {
        match run_method(method, &ctx) {
            Ok(r) => {
                let auc = match &tags {
                    Some(t) => Some(auc_quality(&r.scores, t)?),
                    None => None,
                };
                if let Some(auc) = auc {
                    eprintln!("{method}: AUC_qlt = {auc:.4}");
                }
                results.push((method, Some(r.scores), auc, None));
            }
            Err(e) => {
                eprintln!("{method}: failed: {e}");
                failed += 1;
                results.push((method, None, None, Some(e.to_string())));
            }
        }
    }
    let text = match format_of(&s, ReportFormat::Csv)? {
        ReportFormat::Json => {
            let doc: Vec<serde_json::Value> = results
                .iter()
                .map(|(m, scores, auc, err)| {
                    serde_json::json!({ "method": m, "scores": scores, "auc_qlt": auc, "error": err })
                })
                .collect();
            serde_json::to_string_pretty(&doc).map_err(|e| Failure::Data(e.to_string()))? + "\n"
        }
        ReportFormat::Csv => {
            let ok: Vec<&ScoreRow> =
                results.iter().filter(|r| r.1.is_some()).collect();
            let mut header = vec!["row".to_string()];
            header.extend(ok.iter().map(|r| r.0.to_string()));
            let rows: Vec<Vec<String>> = (0..aux.len())
                .map(|i| {
                    let mut row = vec![i.to_string()];
                    row.extend(ok.iter().map(|r| r.1.as_ref().expect("successful run")[i].to_string()));
                    row
                })
                .collect();
            to_csv(&header, &rows)?
        }
    };
    write_output(s.out.as_deref(), &text)?;
    Ok(if failed > 0 { Outcome::Partial(failed) } else { Outcome::Done })
}

fn synthetic_config(s: &Settings) -> SyntheticConfig {
    let d = SyntheticConfig::default();
    SyntheticConfig {
        n: s.synthetic_n.unwrap_or(d.n),
        d: s.synthetic_d.unwrap_or(d.d),
        m: s.synthetic_m.unwrap_or(d.m),
        aux_per_group: s.aux_per_group.unwrap_or(d.aux_per_group),
        ..d
    }
}

fn experiment_config(s: &Settings, default_methods: &str) -> Result<ExperimentConfig, Failure> {
    let dataset = match &s.data {
        Some(path) => DataSource::Csv {
            name: path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into()),
            path: path.clone(),
            label_column: s.label_column().to_string(),
            foreign: s.foreign.clone().ok_or_else(|| Failure::Config("--data needs --foreign".into()))?,
        },
        None => {
            DataSource::Synthetic {
                name: "synthetic".into(),
                config: synthetic_config(s),
                generator_seed: s.generator_seed.unwrap_or(0),
            }
        }
    };
    let defaults = ExperimentConfig::default();
    Ok(ExperimentConfig {
        datasets: vec![dataset],
        methods: parse_methods(s.methods.as_deref().unwrap_or(default_methods))?,
        seeds: s.seed_list(10)?,
        eap: eap_config(s),
        evaluator: evaluator_params(s),
        downstream: forest_config(s),
        learning_curves: s.learning_curves.unwrap_or(defaults.learning_curves),
        step: s.step,
        foreign_subsample: s.foreign_subsample,
        ..defaults
    })
}

fn benchmark(s: Settings) -> Result<Outcome, Failure> {
    let config = experiment_config(&s, "eap,random,rarity,px,pyx,pyx_plus_npx")?;
    config.validate()?;
    let report = run_experiment(&config)?;
    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    for path in emit_report(&report, format_of(&s, ReportFormat::Json)?, &out)? {
        eprintln!("wrote {}", path.display());
    }
    print!("{}", report.table().render("Evaluator"));
    let failures = report.failures();
    Ok(if failures > 0 { Outcome::Partial(failures) } else { Outcome::Done })
}

fn sweep(s: Settings) -> Result<Outcome, Failure> {
    let mut config = experiment_config(&s, "eap")?;
    config.eap.prior = PriorSpec::Contamination;
    let grid = s.alpha0_grid.clone().unwrap_or_else(|| vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4]);
    let report = prior_sweep(&config, &grid)?;
    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("sweep.json"));
    write_output(Some(&out), &(report_to_json(&report)? + "\n"))?;
    eprintln!("wrote {}", out.display());
    print!("{}", report.ranks.render("Evaluator"));
    let failures: usize = report.variants.iter().map(|v| v.report.failures()).sum();
    Ok(if failures > 0 { Outcome::Partial(failures) } else { Outcome::Done })
}

fn generate(s: Settings) -> Result<Outcome, Failure> {
    let dir = require(&s.out, "out")?;
    let (data, aux) = generate_synthetic_benchmark::<f64>(&synthetic_config(&s), s.generator_seed.or(s.seed).unwrap_or(0))?;
    std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))?;
    write_dataset_csv(dir.join("train.csv"), &data, s.label_column())?;
    write_auxiliary_csv(dir.join("aux.csv"), &aux)?;
    eprintln!("wrote {} and {}", dir.join("train.csv").display(), dir.join("aux.csv").display());
    Ok(Outcome::Done)
}
