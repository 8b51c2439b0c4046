//! Plain reference computations the acceptance checks compare against.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use robotability_core::ahp::PairwiseVote;

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

fn pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Bradley-Terry sampling: `i` is chosen over `j` with probability
/// `w_i / (w_i + w_j)`.
pub fn sample_votes(rng: &mut ChaCha8Rng, weights: &[f64], n_votes: usize, raters: usize) -> Vec<PairwiseVote> {
    let f = ids(weights.len());
    (0..n_votes)
        .map(|k| {
            let (i, j) = pair(rng, weights.len());
            let chosen = if rng.gen::<f64>() < weights[i] / (weights[i] + weights[j]) { i } else { j };
            PairwiseVote::new(&format!("r{}", k % raters), &f[i], &f[j], &f[chosen])
        })
        .collect()
}

/// Coin-flip votes from a handful of raters.
pub fn random_votes(rng: &mut ChaCha8Rng, n: usize, n_votes: usize, raters: usize) -> Vec<PairwiseVote> {
    let f = ids(n);
    (0..n_votes)
        .map(|_| {
            let (i, j) = pair(rng, n);
            let c = if rng.gen_bool(0.5) { i } else { j };
            PairwiseVote::new(&format!("r{}", rng.gen_range(0..raters)), &f[i], &f[j], &f[c])
        })
        .collect()
}

/// `(evaluated, cyclic)` triples by scanning all ordered triples of the
/// strict majority relation.
pub fn brute_force_cycles(votes: &[&PairwiseVote], features: &[String]) -> (u64, u64) {
    let mut wins: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for v in votes {
        *wins.entry((v.chosen.as_str(), v.rejected())).or_insert(0) += 1;
    }
    let get = |a: &str, b: &str| *wins.get(&(a, b)).unwrap_or(&0);
    let n = features.len();
    let (mut cyc, mut eval) = (0u64, 0u64);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a == b || b == c || a == c {
                    continue;
                }
                let (fa, fb, fc) = (features[a].as_str(), features[b].as_str(), features[c].as_str());
                let d = |x: &str, y: &str| get(x, y) != get(y, x);
                let beats = |x: &str, y: &str| get(x, y) > get(y, x);
                if d(fa, fb) && d(fb, fc) && d(fc, fa) {
                    eval += 1;
                    if beats(fa, fb) && beats(fb, fc) && beats(fc, fa) {
                        cyc += 1;
                    }
                }
            }
        }
    }
    (eval / 6, cyc / 3)
}

pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

pub fn ray_cast(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]) {
            inside = !inside;
        }
    }
    inside
}

/// Prints the verdict line and fails the test on FAIL.
pub fn verdict(criterion: &str, ok: bool, detail: impl std::fmt::Display) {
    println!("{} {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion}: {detail}");
}
