//! Quality AUC, learning-curve areas and method ranking.

use serde::{Deserialize, Serialize};

use crate::dataset::PseudoQuality;
use crate::downstream::LearningCurve;
use crate::error::{Error, Result};

/// Probability that a random good candidate outscores a random poor one,
/// ties counting half.
pub fn auc_quality(scores: &[f64], quality: &[PseudoQuality]) -> Result<f64> {
    if scores.len() != quality.len() {
        return Err(Error::invalid(format!("{} scores for {} quality tags", scores.len(), quality.len())));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let good = quality.iter().filter(|&&q| q == PseudoQuality::Good).count();
    let poor = quality.len() - good;
    if good == 0 || poor == 0 {
        return Err(Error::InsufficientData("quality AUC needs both good and poor candidates".into()));
    }
    // Mann-Whitney via midranks of the pooled scores.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_good = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        rank_sum_good += midrank * order[i..j].iter().filter(|&&k| quality[k] == PseudoQuality::Good).count() as f64;
        i = j;
    }
    let u = rank_sum_good - (good * (good + 1)) as f64 / 2.0;
    Ok(u / (good * poor) as f64)
}

/// Trapezoidal area under the curve divided by the x-range.
pub fn aulc(curve: &LearningCurve) -> Result<f64> {
    if curve.xs.len() != curve.ys.len() {
        return Err(Error::invalid("curve coordinates differ in length"));
    }
    if curve.xs.len() < 2 {
        return Err(Error::InsufficientData("a learning curve needs at least two points".into()));
    }
    if curve.xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("curve counts must be strictly increasing"));
    }
    let area: f64 = curve
        .xs
        .windows(2)
        .zip(curve.ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) as f64 * (y[0] + y[1]) / 2.0)
        .sum();
    Ok(area / (curve.xs[curve.xs.len() - 1] - curve.xs[0]) as f64)
}

/// Accuracy at the full budget.
pub fn final_accuracy(curve: &LearningCurve) -> Result<f64> {
    curve.ys.last().copied().ok_or_else(|| Error::InsufficientData("empty learning curve".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

/// Ranks starting at 1 for the best value; ties share their average rank.
pub fn rank_values(values: &[f64], direction: Direction) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match direction {
        Direction::HigherIsBetter => values[b].total_cmp(&values[a]),
        Direction::LowerIsBetter => values[a].total_cmp(&values[b]),
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Ranks methods per experiment (rows of `values`) and averages the ranks
/// per method. Rows must cover the same methods in the same order.
pub fn rank_methods(values: &[Vec<f64>], direction: Direction) -> Result<Vec<f64>> {
    let Some(width) = values.first().map(Vec::len) else {
        return Err(Error::InsufficientData("no experiments to rank".into()));
    };
    if values.iter().any(|row| row.len() != width) {
        return Err(Error::invalid("experiments rank different numbers of methods"));
    }
    let mut mean = vec![0.0; width];
    for row in values {
        for (m, r) in mean.iter_mut().zip(rank_values(row, direction)) {
            *m += r;
        }
    }
    Ok(mean.into_iter().map(|s| s / values.len() as f64).collect())
}

/// One column per metric, one row per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub methods: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn new(methods: Vec<String>, columns: Vec<String>) -> Self {
        let values = vec![vec![f64::NAN; columns.len()]; methods.len()];
        MetricTable { methods, columns, values }
    }

    pub fn set(&mut self, method: &str, column: &str, value: f64) -> Result<()> {
        let r = self.methods.iter().position(|m| m == method);
        let c = self.columns.iter().position(|c| c == column);
        match (r, c) {
            (Some(r), Some(c)) => {
                self.values[r][c] = value;
                Ok(())
            }
            _ => Err(Error::invalid(format!("no cell ({method}, {column})"))),
        }
    }

    pub fn get(&self, method: &str, column: &str) -> Option<f64> {
        let r = self.methods.iter().position(|m| m == method)?;
        let c = self.columns.iter().position(|c| c == column)?;
        Some(self.values[r][c])
    }

    /// Pipe-separated text rendering with values to four decimals.
    pub fn render(&self, first_header: &str) -> String {
        let mut out = format!("{first_header} | {}\n", self.columns.join(" | "));
        for (method, row) in self.methods.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
            out.push_str(&format!("{method} | {}\n", cells.join(" | ")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PseudoQuality::{Good, Poor};

    #[test]
    fn auc_examples() {
        assert_eq!(auc_quality(&[0.9, 0.3, 0.5, 0.1], &[Good, Good, Poor, Poor]).unwrap(), 0.75);
        assert_eq!(auc_quality(&[0.4; 4], &[Good, Poor, Good, Poor]).unwrap(), 0.5);
        assert!(auc_quality(&[0.1, 0.2], &[Good, Good]).is_err());
        assert!(auc_quality(&[f64::NAN, 0.2], &[Good, Poor]).is_err());
    }

    #[test]
    fn aulc_examples() {
        let flat = LearningCurve { xs: vec![0, 5, 10], ys: vec![0.7; 3] };
        assert!((aulc(&flat).unwrap() - 0.7).abs() < 1e-12);
        let ramp = LearningCurve { xs: vec![0, 10], ys: vec![0.5, 1.0] };
        assert_eq!(aulc(&ramp).unwrap(), 0.75);
        assert_eq!(final_accuracy(&ramp).unwrap(), 1.0);
        assert!(aulc(&LearningCurve { xs: vec![0], ys: vec![1.0] }).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(rank_values(&[0.9, 0.5, 0.9, 0.1], Direction::HigherIsBetter), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(rank_values(&[0.9, 0.5, 0.1], Direction::LowerIsBetter), vec![3.0, 2.0, 1.0]);
        let mean = rank_methods(&[vec![0.9, 0.1], vec![0.2, 0.3]], Direction::HigherIsBetter).unwrap();
        assert_eq!(mean, vec![1.5, 1.5]);
    }

    #[test]
    fn table_renders_rows() {
        let mut t = MetricTable::new(vec!["eap".into()], vec!["rAUC_qlt".into(), "Avg. Rank".into()]);
        t.set("eap", "rAUC_qlt", 1.0).unwrap();
        t.set("eap", "Avg. Rank", 1.25).unwrap();
        assert_eq!(t.render("Evaluator"), "Evaluator | rAUC_qlt | Avg. Rank\neap | 1.0000 | 1.2500\n");
        assert!(t.set("eap", "missing", 0.0).is_err());
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<PseudoQuality>)> {
        (2usize..30).prop_flat_map(|l| {
            (
                prop::collection::vec(-5i32..5, l).prop_map(|v| v.into_iter().map(f64::from).collect()),
                prop::collection::vec(any::<bool>(), l)
                    .prop_map(|v| v.into_iter().map(|g| if g { Good } else { Poor }).collect::<Vec<_>>())
                    .prop_filter("both classes", |q: &Vec<PseudoQuality>| q.contains(&Good) && q.contains(&Poor)),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_transform((s, q) in scored()) {
            let t: Vec<f64> = s.iter().map(|v| (v * 0.5).exp() + 3.0).collect();
            prop_assert_eq!(auc_quality(&s, &q).unwrap(), auc_quality(&t, &q).unwrap());
        }

        #[test]
        fn negated_scores_complement((s, q) in scored()) {
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let sum = auc_quality(&s, &q).unwrap() + auc_quality(&neg, &q).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn aulc_matches_unit_step_sum(ys in prop::collection::vec(0.0f64..1.0, 2..40)) {
            let xs: Vec<usize> = (0..ys.len()).collect();
            let k = (ys.len() - 1) as f64;
            let expected = (ys[0] / 2.0 + ys[1..ys.len() - 1].iter().sum::<f64>() + ys[ys.len() - 1] / 2.0) / k;
            let got = aulc(&LearningCurve { xs, ys }).unwrap();
            prop_assert!((got - expected).abs() < 1e-12);
        }
    }
}
