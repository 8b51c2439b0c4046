//! Per-point scores, graph and zone aggregates, and zone ranking.

mod profile;
mod zones;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use profile::{apply_profile, BaseWeights, FieldIssue, RobotProfile, WeightChoice};
pub use zones::{aggregate_zones, max_min_ratio, rank_zones, ZoneAggregate, ZoneAssignment, ZoneRanking};

use crate::ahp::WeightSet;
use crate::catalog::Polarity;
use crate::error::{Error, Result};
use crate::extract::FeatureMatrix;
use crate::par;

/// How a point with some missing features is scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Rescale weights over the point's present features.
    #[default]
    Renormalize,
    /// Treat missing values as 0.
    ZeroFill,
    /// Any missing feature leaves the point unscored.
    PropagateMissing,
}

impl MissingPolicy {
    pub fn name(self) -> &'static str {
        match self {
            MissingPolicy::Renormalize => "renormalize",
            MissingPolicy::ZeroFill => "zero-fill",
            MissingPolicy::PropagateMissing => "propagate-missing",
        }
    }
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "renormalize" => Ok(MissingPolicy::Renormalize),
            "zero-fill" => Ok(MissingPolicy::ZeroFill),
            "propagate-missing" => Ok(MissingPolicy::PropagateMissing),
            _ => Err(Error::invalid(format!(
                "unknown missing policy `{s}` (expected renormalize, zero-fill or propagate-missing)"
            ))),
        }
    }
}

/// Scores for every point of a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    /// `None` for points that could not be scored under the policy.
    pub scores: Vec<Option<f64>>,
    /// Fraction of the scored features present at each point.
    pub coverage: Vec<f64>,
    pub profile: String,
}

impl ScoreField {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Percentile rank of each scored point among all scored points,
    /// `r / (n - 1)` over the order by (score, point id).
    pub fn percentiles(&self) -> Vec<Option<f64>> {
        let mut order: Vec<usize> = (0..self.scores.len()).filter(|&i| self.scores[i].is_some()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (self.scores[a].unwrap_or(0.0), self.scores[b].unwrap_or(0.0));
            x.total_cmp(&y).then(a.cmp(&b))
        });
        let mut out = vec![None; self.scores.len()];
        let n = order.len();
        for (r, &i) in order.iter().enumerate() {
            out[i] = Some(rank_fraction(r, n));
        }
        out
    }
}

pub(crate) fn rank_fraction(r: usize, n: usize) -> f64 {
    if n <= 1 {
        1.0
    } else {
        r as f64 / (n - 1) as f64
    }
}

/// Scores with a weight set that covers exactly the matrix's features.
pub fn score_points(
    matrix: &FeatureMatrix,
    weights: &WeightSet,
    polarities: &BTreeMap<String, Polarity>,
    policy: MissingPolicy,
) -> Result<ScoreField> {
    let have: BTreeSet<&str> = matrix.feature_ids().iter().map(String::as_str).collect();
    let want: BTreeSet<&str> = weights.features().iter().map(String::as_str).collect();
    if have != want {
        let diff: Vec<&str> = have.symmetric_difference(&want).copied().collect();
        return Err(Error::invalid(format!(
            "weight set and feature matrix differ in: {}",
            diff.join(", ")
        )));
    }
    score_selected(matrix, weights, polarities, policy)
}

/// Scores using only the features in `weights`, which must all be matrix
/// columns. Terms are summed in matrix column order.
pub fn score_selected(
    matrix: &FeatureMatrix,
    weights: &WeightSet,
    polarities: &BTreeMap<String, Polarity>,
    policy: MissingPolicy,
) -> Result<ScoreField> {
    let mut terms: Vec<(usize, f64, f64)> = Vec::with_capacity(weights.features().len());
    for (id, w) in weights.iter() {
        let col = matrix
            .feature_index(id)
            .ok_or_else(|| Error::MissingSource { feature: id.to_string() })?;
        let p = polarities
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no polarity for feature `{id}`")))?;
        terms.push((col, w, p.sign()));
    }
    terms.sort_by_key(|t| t.0);
    let cols: Vec<(&[f64], f64, f64)> =
        terms.iter().map(|&(c, w, s)| (matrix.column(c).values.as_slice(), w, s)).collect();
    let nf = cols.len() as f64;
    let per_point = par::map_range(matrix.n_points(), |i| {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        let mut present = 0usize;
        for &(vals, w, s) in &cols {
            let x = vals[i];
            if x.is_nan() {
                continue;
            }
            acc += s * w * x;
            wsum += w;
            present += 1;
        }
        let coverage = if cols.is_empty() { 0.0 } else { present as f64 / nf };
        let score = match policy {
            MissingPolicy::ZeroFill => Some(acc),
            MissingPolicy::PropagateMissing => (present == cols.len()).then_some(acc),
            MissingPolicy::Renormalize if present == cols.len() => Some(acc),
            MissingPolicy::Renormalize => (present > 0).then(|| acc / wsum),
        };
        (score, coverage)
    });
    let (scores, coverage) = per_point.into_iter().unzip();
    Ok(ScoreField { scores, coverage, profile: String::new() })
}

/// Mean score over points with nonzero coverage.
pub fn aggregate_graph(field: &ScoreField) -> Result<f64> {
    let (sum, n) = par::chunked_reduce(
        field.len(),
        (0.0f64, 0usize),
        |(s, n), i| match field.scores[i] {
            Some(v) if field.coverage[i] > 0.0 => (s + v, n + 1),
            _ => (s, n),
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    if n == 0 {
        return Err(Error::Aggregation("no point has any feature data".into()));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahp::WeightSource;

    fn setup(x: Vec<Vec<Option<f64>>>, w: Vec<f64>, p: Vec<Polarity>) -> (FeatureMatrix, WeightSet, BTreeMap<String, Polarity>) {
        let ids: Vec<String> = (0..w.len()).map(|i| format!("f{i}")).collect();
        let m = FeatureMatrix::from_values(ids.clone(), x).unwrap();
        let ws = WeightSet::new(ids.clone(), w, WeightSource::Full).unwrap();
        let pol = ids.into_iter().zip(p).collect();
        (m, ws, pol)
    }

    #[test]
    fn worked_arithmetic() {
        let (m, w, p) = setup(vec![vec![Some(0.7)]], vec![1.0], vec![Polarity::Positive]);
        assert_eq!(score_points(&m, &w, &p, MissingPolicy::Renormalize).unwrap().scores, vec![Some(0.7)]);

        let (m, w, p) = setup(
            vec![vec![Some(1.0), Some(1.0)], vec![Some(0.5), None]],
            vec![0.6, 0.4],
            vec![Polarity::Positive, Polarity::Negative],
        );
        let f = score_points(&m, &w, &p, MissingPolicy::Renormalize).unwrap();
        assert!((f.scores[0].unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(f.scores[1], Some(1.0));
        assert_eq!(f.coverage, vec![1.0, 0.5]);
        let z = score_points(&m, &w, &p, MissingPolicy::ZeroFill).unwrap();
        assert!((z.scores[1].unwrap() - 0.6).abs() < 1e-15);
        let pm = score_points(&m, &w, &p, MissingPolicy::PropagateMissing).unwrap();
        assert_eq!(pm.scores[1], None);
    }

    #[test]
    fn mismatch_lists_difference() {
        let (m, _, p) = setup(vec![vec![Some(0.1)], vec![Some(0.2)]], vec![0.5, 0.5], vec![Polarity::Positive; 2]);
        let other = WeightSet::new(vec!["f0".into(), "zz".into()], vec![0.5, 0.5], WeightSource::Full).unwrap();
        let err = score_points(&m, &other, &p, MissingPolicy::Renormalize).unwrap_err().to_string();
        assert!(err.contains("f1") && err.contains("zz"), "{err}");
    }

    #[test]
    fn graph_means() {
        let f = ScoreField { scores: vec![Some(0.2), Some(0.4), Some(0.6)], coverage: vec![1.0; 3], profile: String::new() };
        assert!((aggregate_graph(&f).unwrap() - 0.4).abs() < 1e-15);
        let f = ScoreField { scores: vec![Some(0.9), None], coverage: vec![1.0, 0.0], profile: String::new() };
        assert_eq!(aggregate_graph(&f).unwrap(), 0.9);
        let f = ScoreField { scores: vec![None], coverage: vec![0.0], profile: String::new() };
        assert!(aggregate_graph(&f).is_err());
    }

    #[test]
    fn policy_names_round_trip() {
        for p in [MissingPolicy::Renormalize, MissingPolicy::ZeroFill, MissingPolicy::PropagateMissing] {
            assert_eq!(p.name().parse::<MissingPolicy>().unwrap(), p);
        }
        assert!("drop".parse::<MissingPolicy>().is_err());
    }
}
