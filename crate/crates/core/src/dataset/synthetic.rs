//! Gaussian-mixture stand-in for benchmark datasets.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AuxiliarySet, Category, LabeledDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding::{self, Rng};

/// Generator parameters. Distances are in units of the normal clusters'
/// standard deviation (1.0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Total rows in the labeled dataset, anomalies included.
    pub n: usize,
    pub d: usize,
    /// Labeled anomalies among the `n` rows.
    pub m: usize,
    /// Rows per category in the generated auxiliary set.
    pub aux_per_group: usize,
    pub clusters: usize,
    /// Scale of the normal cluster centers around the origin.
    pub separation: f64,
    /// Distance from a normal center to the anomaly cluster center.
    pub anomaly_offset: f64,
    pub anomaly_spread: f64,
    /// Minimum distance of unrealistic points from every cluster center.
    pub unrealistic_distance: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 500,
            d: 8,
            m: 100,
            aux_per_group: 40,
            clusters: 3,
            separation: 4.0,
            anomaly_offset: 3.0,
            anomaly_spread: 0.5,
            unrealistic_distance: 10.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.m == 0 || self.clusters == 0 || self.aux_per_group == 0 {
            return Err(Error::invalid("synthetic sizes must be positive"));
        }
        if self.m >= self.n {
            return Err(Error::invalid("synthetic anomaly count must be below n"));
        }
        for (name, v) in [
            ("separation", self.separation),
            ("anomaly_offset", self.anomaly_offset),
            ("anomaly_spread", self.anomaly_spread),
            ("unrealistic_distance", self.unrealistic_distance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("synthetic {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn gaussian(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn around(center: &[f64], direction: &[f64], scale: f64) -> Vec<f64> {
    center.iter().zip(direction).map(|(c, u)| c + scale * u).collect()
}

fn to_matrix<T: Scalar>(rows: &[Vec<f64>], d: usize) -> Array2<T> {
    Array2::from_shape_fn((rows.len(), d), |(i, j)| T::lit(rows[i][j]))
}

/// Normals come from `clusters` unit Gaussians, labeled anomalies and
/// realistic candidates from a tight cluster displaced from the first normal
/// center, unrealistic candidates lie at least `unrealistic_distance` from
/// every center, and indistinguishable candidates are fresh normals.
pub fn generate_synthetic_benchmark<T: Scalar>(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<(LabeledDataset<T>, AuxiliarySet<T>)> {
    config.validate()?;
    let d = config.d;
    let mut rng = seeding::rng(seeding::stream(seed, "synthetic"));

    let centers: Vec<Vec<f64>> = (0..config.clusters)
        .map(|_| gaussian(&mut rng, d).into_iter().map(|x| x * config.separation).collect())
        .collect();
    let offset_dir = unit(&mut rng, d);
    let anomaly_center = around(&centers[0], &offset_dir, config.anomaly_offset);

    let draw_normal = |rng: &mut Rng| {
        let c = &centers[rng.gen_range(0..centers.len())];
        let noise = gaussian(rng, d);
        around(c, &noise, 1.0)
    };
    let draw_anomaly = |rng: &mut Rng| {
        let noise = gaussian(rng, d);
        around(&anomaly_center, &noise, config.anomaly_spread)
    };

    let mut rows: Vec<(Vec<f64>, u8)> = Vec::with_capacity(config.n);
    for _ in 0..config.n - config.m {
        rows.push((draw_normal(&mut rng), 0));
    }
    for _ in 0..config.m {
        rows.push((draw_anomaly(&mut rng), 1));
    }
    rows.shuffle(&mut rng);
    let features: Vec<Vec<f64>> = rows.iter().map(|(x, _)| x.clone()).collect();
    let labels = rows.iter().map(|(_, y)| *y).collect();
    let data = LabeledDataset::new(to_matrix(&features, d), labels)?;

    let all_centers: Vec<&Vec<f64>> = centers.iter().chain(std::iter::once(&anomaly_center)).collect();
    let mut aux: Vec<(Vec<f64>, Category)> = Vec::with_capacity(3 * config.aux_per_group);
    for _ in 0..config.aux_per_group {
        aux.push((draw_anomaly(&mut rng), Category::Realistic));
    }
    for _ in 0..config.aux_per_group {
        aux.push((draw_normal(&mut rng), Category::Indistinguishable));
    }
    let reach = config.unrealistic_distance;
    while aux.len() < 3 * config.aux_per_group {
        let c = &centers[rng.gen_range(0..centers.len())];
        let dir = unit(&mut rng, d);
        let radius = reach * (1.0 + 0.5 * rng.gen::<f64>());
        let p = around(c, &dir, radius);
        let clear = all_centers.iter().all(|center| {
            center.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= reach
        });
        if clear {
            aux.push((p, Category::Unrealistic));
        }
    }
    aux.shuffle(&mut rng);
    let aux_features: Vec<Vec<f64>> = aux.iter().map(|(x, _)| x.clone()).collect();
    let categories = aux.iter().map(|(_, c)| *c).collect();
    let aux_set = AuxiliarySet::with_categories(to_matrix(&aux_features, d), categories)?;
    Ok((data, aux_set))
}
