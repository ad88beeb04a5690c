//! Options shared by every subcommand. Each can come from a flag or from a
//! `key = value` line in the file given by `--config`; flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;

#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// Flat `key = value` file; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Labeled training CSV.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Auxiliary anomaly CSV.
    #[arg(long)]
    pub aux: Option<PathBuf>,
    /// Labeled dataset CSV for `benchmark` and `sweep`; synthetic data when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated CSVs whose rows supply unrealistic anomalies.
    #[arg(long, value_delimiter = ',')]
    pub foreign: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of repetitions, or a comma-separated seed list.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma-separated evaluator names.
    #[arg(long)]
    pub methods: Option<String>,
    /// Prior pseudo-anomaly mass, with beta0 = 1 - alpha0.
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Comma-separated alpha0 values for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub alpha0_grid: Option<Vec<f64>>,
    /// Output file (stdout when absent, where allowed) or directory for `generate`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Weight of the label vote in the detector score.
    #[arg(long)]
    pub blend_weight: Option<f64>,
    /// Neighbors in the detector's label vote.
    #[arg(long)]
    pub detector_k: Option<usize>,
    /// Trees in the downstream random forest.
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub learning_curves: Option<bool>,
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub oob_models: Option<usize>,
    #[arg(long)]
    pub banzhaf_samples: Option<usize>,
    #[arg(long)]
    pub foreign_subsample: Option<usize>,
    /// Synthetic benchmark: total rows.
    #[arg(long)]
    pub synthetic_n: Option<usize>,
    /// Synthetic benchmark: feature count.
    #[arg(long)]
    pub synthetic_d: Option<usize>,
    /// Synthetic benchmark: labeled anomalies.
    #[arg(long)]
    pub synthetic_m: Option<usize>,
    /// Synthetic benchmark: auxiliary rows per category.
    #[arg(long)]
    pub aux_per_group: Option<usize>,
    #[arg(long)]
    pub generator_seed: Option<u64>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| ConfigError(format!("config key `{key}`: cannot parse `{value}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!("config line {}: expected `key = value`", i + 1)));
        };
        let key = key.trim().replace('_', "-");
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError(format!("config key `{key}` given twice")));
        }
    }
    Ok(map)
}

impl Settings {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (key, v) in map {
            let v = v.as_str();
            match key.as_str() {
                "train" => s.train = Some(v.into()),
                "aux" => s.aux = Some(v.into()),
                "data" => s.data = Some(v.into()),
                "foreign" => s.foreign = Some(parse_list(key, v)?),
                "label-column" => s.label_column = Some(v.into()),
                "seed" => s.seed = Some(parse(key, v)?),
                "seeds" => s.seeds = Some(v.into()),
                "methods" => s.methods = Some(v.into()),
                "alpha0" => s.alpha0 = Some(parse(key, v)?),
                "alpha0-grid" => s.alpha0_grid = Some(parse_list(key, v)?),
                "out" => s.out = Some(v.into()),
                "format" => s.format = Some(v.into()),
                "blend-weight" => s.blend_weight = Some(parse(key, v)?),
                "detector-k" => s.detector_k = Some(parse(key, v)?),
                "trees" => s.trees = Some(parse(key, v)?),
                "learning-curves" => s.learning_curves = Some(parse(key, v)?),
                "step" => s.step = Some(parse(key, v)?),
                "knn-k" => s.knn_k = Some(parse(key, v)?),
                "oob-models" => s.oob_models = Some(parse(key, v)?),
                "banzhaf-samples" => s.banzhaf_samples = Some(parse(key, v)?),
                "foreign-subsample" => s.foreign_subsample = Some(parse(key, v)?),
                "synthetic-n" => s.synthetic_n = Some(parse(key, v)?),
                "synthetic-d" => s.synthetic_d = Some(parse(key, v)?),
                "synthetic-m" => s.synthetic_m = Some(parse(key, v)?),
                "aux-per-group" => s.aux_per_group = Some(parse(key, v)?),
                "generator-seed" => s.generator_seed = Some(parse(key, v)?),
                "config" => return Err(ConfigError("config files cannot include other config files".into())),
                other => return Err(ConfigError(format!("unknown config key `{other}`"))),
            }
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_map(&parse_config_text(&text)?)
    }

    /// Values set in `self` (the command line) take precedence over `file`.
    pub fn over(self, file: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { config: self.config, $($f: self.$f.or(file.$f)),* } };
        }
        pick!(
            train, aux, data, foreign, label_column, seed, seeds, methods, alpha0, alpha0_grid, out, format,
            blend_weight, detector_k, trees, learning_curves, step, knn_k, oob_models, banzhaf_samples,
            foreign_subsample, synthetic_n, synthetic_d, synthetic_m, aux_per_group, generator_seed
        )
    }

    /// Command-line values merged over the config file, if any.
    pub fn resolve(self) -> Result<Settings, ConfigError> {
        match self.config.clone() {
            Some(path) => {
                let file = Settings::from_file(&path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }

    pub fn label_column(&self) -> &str {
        self.label_column.as_deref().unwrap_or("label")
    }

    /// `--seeds 5` means seeds `seed..seed+5`; a list is taken verbatim.
    pub fn seed_list(&self, default_count: u64) -> Result<Vec<u64>, ConfigError> {
        let base = self.seed.unwrap_or(0);
        match self.seeds.as_deref() {
            None => Ok((base..base + default_count).collect()),
            Some(v) if v.contains(',') => parse_list("seeds", v),
            Some(v) => {
                let count: u64 = parse("seeds", v)?;
                if count == 0 {
                    return Err(ConfigError("seeds must be positive".into()));
                }
                Ok((base..base + count).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let map = parse_config_text("# run\nseeds = 3\nlabel_column=y # trailing\n\n").unwrap();
        let s = Settings::from_map(&map).unwrap();
        assert_eq!(s.seeds.as_deref(), Some("3"));
        assert_eq!(s.label_column(), "y");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_config_text("seeds").is_err());
        assert!(parse_config_text("a=1\na=2").is_err());
        assert!(Settings::from_map(&parse_config_text("colour = red").unwrap()).is_err());
        assert!(Settings::from_map(&parse_config_text("alpha0 = much").unwrap()).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = Settings { seed: Some(1), alpha0: Some(0.2), ..Settings::default() };
        let flags = Settings { seed: Some(9), ..Settings::default() };
        let merged = flags.over(file);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.alpha0, Some(0.2));
    }

    #[test]
    fn seed_lists() {
        let s = Settings { seed: Some(4), seeds: Some("3".into()), ..Settings::default() };
        assert_eq!(s.seed_list(10).unwrap(), vec![4, 5, 6]);
        let s = Settings { seeds: Some("7, 2".into()), ..Settings::default() };
        assert_eq!(s.seed_list(10).unwrap(), vec![7, 2]);
        assert_eq!(Settings::default().seed_list(2).unwrap(), vec![0, 1]);
        assert!(Settings { seeds: Some("0".into()), ..Settings::default() }.seed_list(1).is_err());
    }
}
