mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robotability_core::extract::{
    additive_layer_count, density_join, minmax_normalize, nearest_facility_distance, nearest_value,
    observation_count_join, proximity_from_distance, slope_gradient, threshold_join, ElevationSampler,
};
use robotability_core::graph::{EdgeSpec, Node, SegmentizedGraph, SidewalkGraph};

fn small_graph(seed: u64) -> SegmentizedGraph {
    let g = random_graph(seed, 6, 8);
    SegmentizedGraph::segmentize(&g, 20.0).unwrap()
}

fn xy(seg: &SegmentizedGraph) -> Vec<[f64; 2]> {
    seg.points().iter().map(|p| p.xy()).collect()
}

fn brute_nearest(items: &[[f64; 2]], q: [f64; 2]) -> usize {
    (0..items.len())
        .min_by(|&a, &b| dist2(items[a], q).total_cmp(&dist2(items[b], q)).then(a.cmp(&b)))
        .unwrap()
}

/// Mean |dz / d| over the `k` closest other points within `d`.
fn brute_slope(pts: &[[f64; 2]], z: &[f64], k: usize, d: f64) -> Vec<Option<f64>> {
    (0..pts.len())
        .map(|i| {
            let mut nb: Vec<(f64, usize)> = (0..pts.len())
                .map(|j| (dist2(pts[i], pts[j]), j))
                .filter(|&(r2, _)| r2 > 0.0 && r2 <= d * d)
                .collect();
            nb.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            nb.truncate(k);
            (!nb.is_empty()).then(|| nb.iter().map(|&(r2, j)| ((z[j] - z[i]) / r2.sqrt()).abs()).sum::<f64>() / nb.len() as f64)
        })
        .collect()
}

fn colinear(xs: &[f64]) -> SegmentizedGraph {
    let nodes: Vec<Node> = xs.iter().enumerate().map(|(i, &x)| Node { id: format!("n{i}"), x, y: 0.0 }).collect();
    let edges = (1..xs.len())
        .map(|i| EdgeSpec::straight(&format!("e{i}"), &format!("n{}", i - 1), &format!("n{i}")))
        .collect();
    SegmentizedGraph::segmentize(&SidewalkGraph::build(nodes, edges).unwrap(), 100.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn minmax_spans_unit_interval(raw in prop::collection::vec(prop::option::weighted(0.8, -1e6f64..1e6), 1..200)) {
        prop_assume!(raw.iter().any(Option::is_some));
        let n = minmax_normalize(&raw).unwrap();
        for (r, v) in raw.iter().zip(&n.values) {
            prop_assert_eq!(r.is_some(), v.is_some());
        }
        let present: Vec<f64> = n.values.iter().flatten().copied().collect();
        prop_assert!(present.iter().all(|v| (0.0..=1.0).contains(v)));
        if n.degenerate {
            prop_assert!(present.iter().all(|&v| v == 0.5));
        } else {
            prop_assert!(present.contains(&0.0));
            prop_assert!(present.contains(&1.0));
        }
    }

    #[test]
    fn slope_matches_brute_force_and_is_offset_invariant(seed in any::<u64>(), k in 1usize..10, d in 5.0f64..80.0, c in -500.0f64..500.0, a in 0.1f64..10.0) {
        let seg = small_graph(seed);
        let pts = xy(&seg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let z: Vec<f64> = (0..pts.len()).map(|_| rng.gen_range(0.0..30.0)).collect();
        let got = slope_gradient(&seg, &z, k, d).unwrap();
        let want = brute_slope(&pts, &z, k, d);
        for (g, w) in got.iter().zip(&want) {
            match (g, w) {
                (Some(g), Some(w)) => prop_assert!((g - w).abs() <= 1e-12 * w.max(1.0)),
                (None, None) => {}
                _ => prop_assert!(false, "missingness differs: {:?} vs {:?}", g, w),
            }
        }
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = z.iter().map(|v| v * a).collect();
        let s1 = slope_gradient(&seg, &shifted, k, d).unwrap();
        let s2 = slope_gradient(&seg, &scaled, k, d).unwrap();
        // rounding in z + c is amplified by 1 / distance
        let r_min = pts
            .iter()
            .flat_map(|p| pts.iter().map(move |q| dist(*p, *q)))
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min);
        let tol = 1e-13 * (30.0 + c.abs()) / r_min.min(1.0);
        for i in 0..pts.len() {
            if let Some(g) = got[i] {
                prop_assert!((s1[i].unwrap() - g).abs() <= tol + 1e-12 * g);
                prop_assert!((s2[i].unwrap() - a * g).abs() <= 1e-12 * a * g.max(1.0));
            }
        }
    }

    #[test]
    fn density_is_additive_over_disjoint_sets(seed in any::<u64>(), n1 in 0usize..60, n2 in 0usize..60, r in 1.0f64..40.0) {
        let seg = small_graph(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_points(&mut rng, n1, -20.0, 420.0);
        let b = random_points(&mut rng, n2, -20.0, 420.0);
        let classes: Vec<String> = (0..n1 + n2).map(|_| ["bench", "tree", "pole"][rng.gen_range(0..3)].to_string()).collect();
        let cw: BTreeMap<String, f64> = [("bench", 0.5), ("tree", 2.0), ("pole", 1.25)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let all: Vec<[f64; 2]> = a.iter().chain(&b).copied().collect();
        let va = density_join(&seg, &a, Some(&classes[..n1]), &cw, r).unwrap();
        let vb = density_join(&seg, &b, Some(&classes[n1..]), &cw, r).unwrap();
        let vab = density_join(&seg, &all, Some(&classes), &cw, r).unwrap();
        let pts = xy(&seg);
        for i in 0..seg.len() {
            prop_assert!((va[i] + vb[i] - vab[i]).abs() <= 1e-9);
            let brute: f64 = all.iter().zip(&classes).filter(|(q, _)| dist2(**q, pts[i]) <= r * r).map(|(_, c)| cw[c]).sum();
            prop_assert!((vab[i] - brute).abs() <= 1e-9);
        }
    }

    #[test]
    fn one_observation_per_point_reproduces_counts(seed in any::<u64>()) {
        let seg = small_graph(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts: Vec<f64> = (0..seg.len()).map(|_| rng.gen_range(0..50) as f64).collect();
        let pts = xy(&seg);
        let got = observation_count_join(&seg, &pts, &counts).unwrap();
        for i in 0..pts.len() {
            // coincident points (parallel duplicate edges) share observations
            if pts.iter().filter(|q| **q == pts[i]).count() == 1 {
                prop_assert_eq!(got[i], Some(counts[i]));
            }
        }
    }

    #[test]
    fn point_joins_match_brute_force(seed in any::<u64>(), n in 1usize..80, r in 1.0f64..60.0, t in -1.0f64..1.0) {
        let seg = small_graph(seed);
        let pts = xy(&seg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
        let items = random_points(&mut rng, n, -20.0, 420.0);
        let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vals2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let near = nearest_value(&seg, &items, &vals).unwrap();
        let fac = nearest_facility_distance(&seg, &items).unwrap();
        let thr = threshold_join(&seg, &items, &[&vals, &vals2], t).unwrap();
        let layers: Vec<&[[f64; 2]]> = items.chunks(n.div_ceil(3)).collect();
        let cnt = additive_layer_count(&seg, &layers, r).unwrap();
        let obs = observation_count_join(&seg, &items, &vals.iter().map(|v| v.abs()).collect::<Vec<_>>()).unwrap();

        let mut sums = vec![(0.0, 0u32); pts.len()];
        for (q, v) in items.iter().zip(&vals) {
            let p = brute_nearest(&pts, *q);
            sums[p].0 += v.abs();
            sums[p].1 += 1;
        }
        for i in 0..pts.len() {
            let m = brute_nearest(&items, pts[i]);
            prop_assert_eq!(near[i], vals[m]);
            prop_assert!((fac[i] - dist2(items[m], pts[i]).sqrt()).abs() <= 1e-12);
            let expect = if vals[m] > t && vals2[m] > t { 1.0 } else { 0.0 };
            prop_assert_eq!(thr[i], expect);
            let layer_hits = layers.iter().filter(|l| l.iter().any(|q| dist2(*q, pts[i]) <= r * r)).count();
            prop_assert_eq!(cnt[i], layer_hits as f64);
            let o = (sums[i].1 > 0).then(|| sums[i].0 / sums[i].1 as f64);
            match (obs[i], o) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
        let prox = proximity_from_distance(&fac).unwrap();
        if !prox.degenerate {
            let (lo, hi) = fac.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
            for (p, d) in prox.values.iter().zip(&fac) {
                prop_assert!((p.unwrap() - (1.0 - (d - lo) / (hi - lo))).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn slope_hand_computed_values() {
    let seg = colinear(&[0.0, 10.0, 20.0]);
    let mid = seg.nearest_point([10.0, 0.0]);
    let z: Vec<f64> = seg.points().iter().map(|p| p.x / 10.0).collect();
    let s = slope_gradient(&seg, &z, 2, 15.0).unwrap();
    assert!((s[mid].unwrap() - 0.1).abs() <= 1e-12);
    // end points see one neighbor within 15 m
    assert!((s[seg.nearest_point([0.0, 0.0])].unwrap() - 0.1).abs() <= 1e-12);

    let flat = slope_gradient(&seg, &[7.0; 3], 2, 15.0).unwrap();
    assert!(flat.iter().all(|v| *v == Some(0.0)));

    // a valley: uphill and downhill of equal magnitude
    let v: Vec<f64> = seg.points().iter().map(|p| (p.x - 10.0).abs() / 10.0).collect();
    assert!((slope_gradient(&seg, &v, 2, 15.0).unwrap()[mid].unwrap() - 0.1).abs() <= 1e-12);

    assert!(slope_gradient(&seg, &z, 2, 5.0).unwrap().iter().all(Option::is_none));
}

#[test]
fn raster_sampling_feeds_slope() {
    let seg = colinear(&[0.0, 10.0, 20.0]);
    let raster = ElevationSampler::from_fn(30, 3, [-5.0, -5.0], 1.0, |x, _| 0.1 * x).unwrap();
    let z = raster.sample_all(&xy(&seg)).unwrap();
    let s = slope_gradient(&seg, &z, 2, 15.0).unwrap();
    assert!(s.iter().all(|v| (v.unwrap() - 0.1).abs() < 1e-9), "{s:?}");
}
