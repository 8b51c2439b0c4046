//! Pairwise-vote aggregation and principal-eigenvector weights.
//!
//! Votes are tallied into a positive reciprocal matrix of preference ratios;
//! the weights are its Perron vector scaled to sum to one. Restricting the
//! matrix to a subset of features and re-solving yields weights for robots
//! that only use some of the indicators.

mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_matrix, read_votes, read_weights, write_matrix, write_votes, write_weights};

/// Convergence threshold on the max-norm change of the normalized iterate.
pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

/// One binary comparison answered by one rater.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairwiseVote {
    pub rater_id: String,
    pub feature_a: String,
    pub feature_b: String,
    pub chosen: String,
}

impl PairwiseVote {
    pub fn new(rater: &str, a: &str, b: &str, chosen: &str) -> Self {
        Self {
            rater_id: rater.to_string(),
            feature_a: a.to_string(),
            feature_b: b.to_string(),
            chosen: chosen.to_string(),
        }
    }

    /// The feature that was not chosen.
    pub fn rejected(&self) -> &str {
        if self.chosen == self.feature_a {
            &self.feature_b
        } else {
            &self.feature_a
        }
    }
}

/// What to do with a pair that nobody compared when smoothing is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncomparedPolicy {
    /// Treat as indifference (ratio 1).
    #[default]
    NeutralFill,
    Error,
}

/// All unordered pairs `(f_i, f_j)` with `i < j` in the given order.
pub fn enumerate_pairs(features: &[String]) -> Result<Vec<(String, String)>> {
    index_features(features)?;
    let n = features.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((features[i].clone(), features[j].clone()));
        }
    }
    Ok(out)
}

fn index_features(features: &[String]) -> Result<HashMap<&str, usize>> {
    if features.is_empty() {
        return Err(Error::invalid("feature list is empty"));
    }
    let mut idx = HashMap::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        if idx.insert(f.as_str(), i).is_some() {
            return Err(Error::DuplicateId { kind: "feature", id: f.clone() });
        }
    }
    Ok(idx)
}

/// Directed win tallies: `wins[i * n + j]` counts votes choosing `i` over `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    features: Vec<String>,
    wins: Vec<u64>,
}

impl Tally {
    pub fn from_votes<'a>(votes: impl IntoIterator<Item = &'a PairwiseVote>, features: &[String]) -> Result<Self> {
        let idx = index_features(features)?;
        let n = features.len();
        let mut wins = vec![0u64; n * n];
        let lookup = |id: &str| {
            idx.get(id)
                .copied()
                .ok_or_else(|| Error::UnknownId { kind: "feature", id: id.to_string() })
        };
        for v in votes {
            if v.feature_a == v.feature_b {
                return Err(Error::invalid(format!(
                    "rater `{}` compared `{}` with itself",
                    v.rater_id, v.feature_a
                )));
            }
            if v.chosen != v.feature_a && v.chosen != v.feature_b {
                return Err(Error::invalid(format!(
                    "rater `{}` chose `{}`, which is not in the pair ({}, {})",
                    v.rater_id, v.chosen, v.feature_a, v.feature_b
                )));
            }
            let a = lookup(&v.feature_a)?;
            let b = lookup(&v.feature_b)?;
            let (w, l) = if v.chosen == v.feature_a { (a, b) } else { (b, a) };
            wins[w * n + l] += 1;
        }
        Ok(Self { features: features.to_vec(), wins })
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.wins[i * self.features.len() + j]
    }

    /// Strict majority relation: `Some(true)` if `i` beats `j`,
    /// `Some(false)` if `j` beats `i`, `None` for ties and unseen pairs.
    pub fn prefers(&self, i: usize, j: usize) -> Option<bool> {
        let (a, b) = (self.wins(i, j), self.wins(j, i));
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => Some(true),
            std::cmp::Ordering::Less => Some(false),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Positive reciprocal matrix of preference ratios, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyMatrix {
    features: Vec<String>,
    entries: Vec<f64>,
    smoothing: f64,
}

impl ContingencyMatrix {
    /// Validates and wraps explicit entries (row-major, `n * n`).
    pub fn from_entries(features: Vec<String>, entries: Vec<f64>, smoothing: f64) -> Result<Self> {
        index_features(&features)?;
        let n = features.len();
        if entries.len() != n * n {
            return Err(Error::invalid(format!("expected {} matrix entries, got {}", n * n, entries.len())));
        }
        if !(smoothing.is_finite() && smoothing >= 0.0) {
            return Err(Error::invalid(format!("smoothing must be non-negative, got {smoothing}")));
        }
        for i in 0..n {
            if entries[i * n + i] != 1.0 {
                return Err(Error::invalid(format!("diagonal entry for `{}` is not 1", features[i])));
            }
            for j in 0..n {
                let e = entries[i * n + j];
                if !(e.is_finite() && e > 0.0) {
                    return Err(Error::invalid(format!(
                        "entry ({}, {}) = {e} is not strictly positive",
                        features[i], features[j]
                    )));
                }
                let prod = e * entries[j * n + i];
                if (prod - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "entries ({0}, {1}) and ({1}, {0}) are not reciprocal",
                        features[i], features[j]
                    )));
                }
            }
        }
        Ok(Self { features, entries, smoothing })
    }

    /// Matrix of exact ratios `w_i / w_j`.
    pub fn from_weights(features: Vec<String>, weights: &[f64]) -> Result<Self> {
        let n = features.len();
        if weights.len() != n || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("weights must be positive and match the feature count"));
        }
        let mut entries = vec![1.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let r = weights[i] / weights[j];
                entries[i * n + j] = r;
                entries[j * n + i] = 1.0 / r;
            }
        }
        Self::from_entries(features, entries, 0.0)
    }

    pub fn build(
        votes: &[PairwiseVote],
        features: &[String],
        smoothing: f64,
        policy: UncomparedPolicy,
    ) -> Result<Self> {
        let tally = Tally::from_votes(votes, features)?;
        Self::from_tally(&tally, smoothing, policy)
    }

    /// `M[i][j] = (wins(i, j) + s) / (wins(j, i) + s)`; the lower triangle
    /// holds the inverses.
    pub fn from_tally(tally: &Tally, smoothing: f64, policy: UncomparedPolicy) -> Result<Self> {
        if !(smoothing.is_finite() && smoothing >= 0.0) {
            return Err(Error::invalid(format!("smoothing must be non-negative, got {smoothing}")));
        }
        let features = tally.features().to_vec();
        let n = features.len();
        let mut entries = vec![1.0; n * n];
        let mut uncompared = Vec::new();
        let mut one_sided = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let up = tally.wins(i, j) as f64 + smoothing;
                let down = tally.wins(j, i) as f64 + smoothing;
                let ratio = if up == 0.0 && down == 0.0 {
                    match policy {
                        UncomparedPolicy::NeutralFill => 1.0,
                        UncomparedPolicy::Error => {
                            uncompared.push((features[i].clone(), features[j].clone()));
                            continue;
                        }
                    }
                } else if up == 0.0 || down == 0.0 {
                    one_sided.push((features[i].clone(), features[j].clone()));
                    continue;
                } else {
                    up / down
                };
                entries[i * n + j] = ratio;
                entries[j * n + i] = 1.0 / ratio;
            }
        }
        if !uncompared.is_empty() {
            return Err(Error::UncomparablePairs(uncompared));
        }
        if !one_sided.is_empty() {
            let list = one_sided
                .iter()
                .map(|(a, b)| format!("({a}, {b})"))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::invalid(format!(
                "unanimous pairs give an infinite ratio without smoothing: {list}"
            )));
        }
        Ok(Self { features, entries, smoothing })
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f == id)
    }

    /// Row/column submatrix over `keep`, in this matrix's feature order.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Result<ContingencyMatrix> {
        for id in keep {
            if self.index_of(id).is_none() {
                return Err(Error::UnknownId { kind: "feature", id: id.clone() });
            }
        }
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.features[i])).collect();
        let m = idx.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in &idx {
            for &j in &idx {
                entries.push(self.entry(i, j));
            }
        }
        Ok(ContingencyMatrix {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            entries,
            smoothing: self.smoothing,
        })
    }

    fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.entries[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

/// Where a weight set came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSource {
    Full,
    SubsetOf(String),
    File(String),
}

impl fmt::Display for WeightSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSource::Full => f.write_str("full"),
            WeightSource::SubsetOf(p) => write!(f, "subset-of:{p}"),
            WeightSource::File(p) => write!(f, "file:{p}"),
        }
    }
}

impl FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            Ok(WeightSource::Full)
        } else if let Some(p) = s.strip_prefix("subset-of:") {
            Ok(WeightSource::SubsetOf(p.to_string()))
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(WeightSource::File(p.to_string()))
        } else if s == "file" {
            Ok(WeightSource::File(String::new()))
        } else {
            Err(Error::invalid(format!("unknown weight source `{s}`")))
        }
    }
}

/// Positive weights over an ordered feature list, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    features: Vec<String>,
    weights: Vec<f64>,
    source: WeightSource,
}

impl WeightSet {
    /// Wraps weights that already sum to one (within 1e-12).
    pub fn new(features: Vec<String>, weights: Vec<f64>, source: WeightSource) -> Result<Self> {
        index_features(&features)?;
        if features.len() != weights.len() {
            return Err(Error::invalid("weight count does not match feature count"));
        }
        if let Some((id, w)) = features.iter().zip(&weights).find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("weight for `{id}` must be positive, got {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { features, weights, source })
    }

    /// Divides by the sum first.
    pub fn from_unnormalized(features: Vec<String>, raw: Vec<f64>, source: WeightSource) -> Result<Self> {
        if raw.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("weights must be positive"));
        }
        let sum: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / sum).collect();
        Self::new(features, weights, source)
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn source(&self) -> &WeightSource {
        &self.source
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.features.iter().position(|f| f == id).map(|i| self.weights[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.features.iter().map(String::as_str).zip(self.weights.iter().copied())
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        self.iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Feature indices sorted by descending weight, ties by position.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        idx
    }

    /// Keeps `keep` and rescales by `w_i / sum(w_j, j in keep)`.
    pub fn rescaled_subset(&self, keep: &BTreeSet<String>) -> Result<WeightSet> {
        if keep.len() < 2 {
            return Err(Error::invalid("a feature subset needs at least 2 features"));
        }
        for id in keep {
            if self.get(id).is_none() {
                return Err(Error::UnknownId { kind: "feature", id: id.clone() });
            }
        }
        let (ids, raw): (Vec<String>, Vec<f64>) = self
            .iter()
            .filter(|(id, _)| keep.contains(*id))
            .map(|(id, w)| (id.to_string(), w))
            .unzip();
        Self::from_unnormalized(ids, raw, WeightSource::SubsetOf(self.source.to_string()))
    }
}

/// Result of the eigen solve, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalEigen {
    pub weights: WeightSet,
    pub eigenvalue: f64,
    pub iterations: usize,
}

/// Principal eigenvector of `matrix` scaled to sum to one.
pub fn principal_weights(matrix: &ContingencyMatrix) -> Result<WeightSet> {
    principal_eigen(matrix, WeightSource::Full).map(|e| e.weights)
}

/// Power iteration from the uniform vector. Each iterate is scaled to unit
/// sum; all entries are positive so the Perron vector is reached without
/// sign fixing.
pub fn principal_eigen(matrix: &ContingencyMatrix, source: WeightSource) -> Result<PrincipalEigen> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::invalid("matrix is empty"));
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < POWER_MAX_ITERATIONS {
        iterations += 1;
        matrix.mul_vec(&v, &mut next);
        let sum: f64 = next.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::NoConvergence { iterations, residual: f64::NAN });
        }
        next.iter_mut().for_each(|x| *x /= sum);
        delta = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if delta < POWER_TOLERANCE {
            break;
        }
    }
    // eigenvalue estimate and residual ||Mv - lambda v||_inf
    matrix.mul_vec(&v, &mut next);
    let eigenvalue = next.iter().sum::<f64>() / v.iter().sum::<f64>();
    if delta >= POWER_TOLERANCE {
        let residual = next
            .iter()
            .zip(&v)
            .map(|(mv, x)| (mv - eigenvalue * x).abs())
            .fold(0.0, f64::max);
        return Err(Error::NoConvergence { iterations, residual });
    }
    let weights = WeightSet::from_unnormalized(matrix.features.clone(), v, source)?;
    Ok(PrincipalEigen { weights, eigenvalue, iterations })
}

/// Weights re-solved on the submatrix over `keep`.
pub fn subset_weights(matrix: &ContingencyMatrix, keep: &BTreeSet<String>) -> Result<WeightSet> {
    if keep.len() < 2 {
        return Err(Error::invalid(format!(
            "a feature subset needs at least 2 features, got {}",
            keep.len()
        )));
    }
    let sub = matrix.restrict(keep)?;
    let source = if keep.len() == matrix.len() {
        WeightSource::Full
    } else {
        WeightSource::SubsetOf("full".to_string())
    };
    principal_eigen(&sub, source).map(|e| e.weights)
}

/// Preference-cycle counts over feature triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitivityReport {
    /// Cyclic triples in each rater's own majority relation.
    pub intra_rater: BTreeMap<String, u64>,
    /// Cyclic triples in the pooled majority relation.
    pub inter_rater_violations: u64,
    /// Pooled triples with a strict preference on all three pairs.
    pub triples_evaluated: u64,
    pub violation_fraction: f64,
}

/// Counts `(evaluated, cyclic)` unordered triples under the strict
/// majority relation of `tally`.
fn count_cycles(tally: &Tally) -> (u64, u64) {
    let n = tally.features().len();
    let (mut evaluated, mut cyclic) = (0, 0);
    for i in 0..n {
        for j in i + 1..n {
            let Some(ij) = tally.prefers(i, j) else { continue };
            for k in j + 1..n {
                let (Some(jk), Some(ki)) = (tally.prefers(j, k), tally.prefers(k, i)) else {
                    continue;
                };
                evaluated += 1;
                // i>j>k>i or the reverse orientation
                if ij == jk && jk == ki {
                    cyclic += 1;
                }
            }
        }
    }
    (evaluated, cyclic)
}

pub fn transitivity_report(votes: &[PairwiseVote], features: &[String]) -> Result<TransitivityReport> {
    let pooled = Tally::from_votes(votes, features)?;
    let (evaluated, violations) = count_cycles(&pooled);

    let mut by_rater: BTreeMap<&str, Vec<&PairwiseVote>> = BTreeMap::new();
    for v in votes {
        by_rater.entry(&v.rater_id).or_default().push(v);
    }
    let mut intra_rater = BTreeMap::new();
    for (rater, vs) in by_rater {
        let t = Tally::from_votes(vs, features)?;
        intra_rater.insert(rater.to_string(), count_cycles(&t).1);
    }
    Ok(TransitivityReport {
        intra_rater,
        inter_rater_violations: violations,
        triples_evaluated: evaluated,
        violation_fraction: if evaluated > 0 {
            violations as f64 / evaluated as f64
        } else {
            0.0
        },
    })
}

/// Distinct feature ids mentioned by `votes`, in first-seen order.
pub fn features_in_votes(votes: &[PairwiseVote]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for v in votes {
        for id in [&v.feature_a, &v.feature_b] {
            if seen.insert(id.as_str()) {
                out.push(id.clone());
            }
        }
    }
    out
}
