//! Straightforward reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use robotability_core::ahp::PairwiseVote;
use robotability_core::graph::{EdgeSpec, Node, SidewalkGraph};

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

/// Random positive weights summing to one.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

/// Bradley-Terry votes: `i` beats `j` with probability `w_i / (w_i + w_j)`.
pub fn sample_votes(rng: &mut ChaCha8Rng, weights: &[f64], n_votes: usize, raters: usize) -> Vec<PairwiseVote> {
    let f = ids(weights.len());
    (0..n_votes)
        .map(|k| {
            let i = rng.gen_range(0..weights.len());
            let mut j = rng.gen_range(0..weights.len() - 1);
            if j >= i {
                j += 1;
            }
            let p = weights[i] / (weights[i] + weights[j]);
            let chosen = if rng.gen::<f64>() < p { i } else { j };
            PairwiseVote::new(&format!("r{}", k % raters), &f[i], &f[j], &f[chosen])
        })
        .collect()
}

/// Arbitrary votes over `n` features, possibly leaving pairs uncompared.
pub fn random_votes(rng: &mut ChaCha8Rng, n: usize, n_votes: usize, raters: usize) -> Vec<PairwiseVote> {
    let f = ids(n);
    (0..n_votes)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let c = if rng.gen_bool(0.5) { i } else { j };
            PairwiseVote::new(&format!("r{}", rng.gen_range(0..raters)), &f[i], &f[j], &f[c])
        })
        .collect()
}

/// Dense power iteration with no early exit, for comparison.
pub fn power_iteration(m: &[Vec<f64>], iterations: usize) -> Vec<f64> {
    let n = m.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..iterations {
        let mut next: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i][j] * v[j]).sum()).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        v = next;
    }
    v
}

/// Win counts keyed by (winner, loser).
pub fn wins(votes: &[&PairwiseVote]) -> BTreeMap<(String, String), u64> {
    let mut out = BTreeMap::new();
    for v in votes {
        *out.entry((v.chosen.clone(), v.rejected().to_string())).or_insert(0) += 1;
    }
    out
}

/// Cyclic and evaluated triples by enumerating every ordered triple.
pub fn brute_force_cycles(votes: &[&PairwiseVote], features: &[String]) -> (u64, u64) {
    let w = wins(votes);
    let get = |a: &String, b: &String| *w.get(&(a.clone(), b.clone())).unwrap_or(&0);
    let beats = |a: &String, b: &String| get(a, b) > get(b, a);
    let decided = |a: &String, b: &String| get(a, b) != get(b, a);
    let n = features.len();
    let (mut cyc_ordered, mut eval_ordered) = (0u64, 0u64);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if a == b || b == c || a == c {
                    continue;
                }
                let (fa, fb, fc) = (&features[a], &features[b], &features[c]);
                if decided(fa, fb) && decided(fb, fc) && decided(fc, fa) {
                    eval_ordered += 1;
                    if beats(fa, fb) && beats(fb, fc) && beats(fc, fa) {
                        cyc_ordered += 1;
                    }
                }
            }
        }
    }
    // each cycle appears under 3 rotations; each triple under 6 orderings
    (eval_ordered / 6, cyc_ordered / 3)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
}

/// Random nodes in a 400 m square joined by straight or once-bent edges.
pub fn random_graph(seed: u64, n_nodes: usize, n_edges: usize) -> SidewalkGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<Node> = (0..n_nodes)
        .map(|i| Node { id: format!("n{i}"), x: rng.gen_range(0.0..400.0), y: rng.gen_range(0.0..400.0) })
        .collect();
    let edges = (0..n_edges)
        .map(|k| {
            let a = rng.gen_range(0..n_nodes);
            let mut b = rng.gen_range(0..n_nodes - 1);
            if b >= a {
                b += 1;
            }
            let mut e = EdgeSpec::straight(&format!("e{k}"), &nodes[a].id, &nodes[b].id);
            if rng.gen_bool(0.5) {
                let pa = [nodes[a].x, nodes[a].y];
                let pb = [nodes[b].x, nodes[b].y];
                let mid = [rng.gen_range(0.0..400.0), rng.gen_range(0.0..400.0)];
                e.polyline = vec![pa, mid, pb];
            }
            e
        })
        .collect();
    SidewalkGraph::build(nodes, edges).unwrap()
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.gen_range(lo..hi), rng.gen_range(lo..hi)]).collect()
}

/// Squared distance computed the same way the spatial index does, so
/// near-ties resolve identically.
pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}
