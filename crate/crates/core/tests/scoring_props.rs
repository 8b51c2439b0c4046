mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robotability_core::ahp::{principal_weights, ContingencyMatrix, PairwiseVote, UncomparedPolicy, WeightSet, WeightSource};
use robotability_core::catalog::Polarity;
use robotability_core::extract::FeatureMatrix;
use robotability_core::geo::{Polygon, Zone};
use robotability_core::scoring::{
    aggregate_graph, aggregate_zones, rank_zones, score_points, MissingPolicy, ScoreField, ZoneAssignment,
};

struct Instance {
    x: Vec<Vec<Option<f64>>>,
    w: Vec<f64>,
    p: Vec<f64>,
}

fn instance(rng: &mut ChaCha8Rng, n_points: usize, n_feat: usize, missing: f64) -> Instance {
    let x = (0..n_feat)
        .map(|_| (0..n_points).map(|_| (!rng.gen_bool(missing)).then(|| rng.gen_range(0.0..=1.0))).collect())
        .collect();
    let w = random_weights(rng, n_feat);
    let p = (0..n_feat).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    Instance { x, w, p }
}

fn engine(inst: &Instance, flip: bool, policy: MissingPolicy) -> ScoreField {
    let f = ids(inst.w.len());
    let m = FeatureMatrix::from_values(f.clone(), inst.x.clone()).unwrap();
    let w = WeightSet::new(f.clone(), inst.w.clone(), WeightSource::Full).unwrap();
    let pol: BTreeMap<String, Polarity> = f
        .iter()
        .zip(&inst.p)
        .map(|(id, &s)| {
            let s = if flip { -s } else { s };
            (id.clone(), if s > 0.0 { Polarity::Positive } else { Polarity::Negative })
        })
        .collect();
    score_points(&m, &w, &pol, policy).unwrap()
}

/// Renormalized weighted sum, written out directly.
fn oracle_scores(inst: &Instance) -> Vec<(Option<f64>, f64)> {
    let n = inst.x[0].len();
    (0..n)
        .map(|i| {
            let (mut num, mut den, mut present) = (0.0, 0.0, 0);
            for f in 0..inst.w.len() {
                if let Some(v) = inst.x[f][i] {
                    num += inst.p[f] * inst.w[f] * v;
                    den += inst.w[f];
                    present += 1;
                }
            }
            let cov = present as f64 / inst.w.len() as f64;
            let score = if present == inst.w.len() {
                Some(num)
            } else if present > 0 {
                Some(num / den)
            } else {
                None
            };
            (score, cov)
        })
        .collect()
}

fn ray_cast(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
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

fn random_zones(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Zone>, Vec<Vec<[f64; 2]>>) {
    let mut zones = Vec::new();
    let mut rings = Vec::new();
    for z in 0..n {
        let ring: Vec<[f64; 2]> = if z % 3 == 2 {
            let c = [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)];
            let r = rng.gen_range(10.0..50.0);
            vec![[c[0] - r, c[1] - r], [c[0] + r, c[1] - r], [c[0], c[1] + r]]
        } else {
            let (x0, y0) = (rng.gen_range(-10.0..90.0), rng.gen_range(-10.0..90.0));
            let (w, h) = (rng.gen_range(5.0..60.0), rng.gen_range(5.0..60.0));
            vec![[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]
        };
        let mut closed = ring.clone();
        closed.push(ring[0]);
        zones.push(Zone::new(format!("z{z:02}"), vec![Polygon::new(vec![closed]).unwrap()]).unwrap());
        rings.push(ring);
    }
    (zones, rings)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scores_match_oracle_and_stay_bounded(seed in any::<u64>(), nf in 1usize..12, miss in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instance(&mut rng, 100, nf, miss);
        let got = engine(&inst, false, MissingPolicy::Renormalize);
        for (i, (s, c)) in oracle_scores(&inst).into_iter().enumerate() {
            prop_assert!((got.coverage[i] - c).abs() <= 1e-15);
            match (got.scores[i], s) {
                (Some(a), Some(b)) => {
                    prop_assert!((a - b).abs() <= 1e-12);
                    prop_assert!(a.abs() <= 1.0 + 1e-12);
                }
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn flipping_every_polarity_negates_scores(seed in any::<u64>(), nf in 1usize..10, miss in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instance(&mut rng, 60, nf, miss);
        for policy in [MissingPolicy::Renormalize, MissingPolicy::ZeroFill, MissingPolicy::PropagateMissing] {
            let a = engine(&inst, false, policy);
            let b = engine(&inst, true, policy);
            for (x, y) in a.scores.iter().zip(&b.scores) {
                prop_assert_eq!(x.map(|v| -v), *y);
            }
        }
    }

    #[test]
    fn scoring_is_linear_in_the_matrix(seed in any::<u64>(), nf in 1usize..10, alpha in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instance(&mut rng, 60, nf, 0.0);
        let scaled = Instance {
            x: inst.x.iter().map(|c| c.iter().map(|v| v.map(|v| alpha * v)).collect()).collect(),
            w: inst.w.clone(),
            p: inst.p.clone(),
        };
        let a = engine(&inst, false, MissingPolicy::Renormalize);
        let b = engine(&scaled, false, MissingPolicy::Renormalize);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            prop_assert!((alpha * x.unwrap() - y.unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn raising_a_feature_moves_score_with_its_polarity(seed in any::<u64>(), nf in 1usize..10, miss in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instance(&mut rng, 40, nf, miss);
        let f = rng.gen_range(0..nf);
        let bumped = Instance {
            x: inst.x.iter().enumerate().map(|(k, c)| {
                c.iter().map(|v| if k == f { v.map(|v| (v + 0.3).min(1.0)) } else { *v }).collect()
            }).collect(),
            w: inst.w.clone(),
            p: inst.p.clone(),
        };
        for policy in [MissingPolicy::Renormalize, MissingPolicy::ZeroFill] {
            let a = engine(&inst, false, policy);
            let b = engine(&bumped, false, policy);
            for (x, y) in a.scores.iter().zip(&b.scores) {
                if let (Some(x), Some(y)) = (x, y) {
                    if inst.p[f] > 0.0 {
                        prop_assert!(*y >= *x - 1e-15);
                    } else {
                        prop_assert!(*y <= *x + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn zone_means_match_brute_force(seed in any::<u64>(), nz in 1usize..12, n in 1usize..1000, miss in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng, n, -20.0, 140.0);
        let inst = instance(&mut rng, n, 4, miss);
        let field = engine(&inst, false, MissingPolicy::Renormalize);
        let (zones, rings) = random_zones(&mut rng, nz);
        let aggs = aggregate_zones(&field, &ZoneAssignment::new(&pts, &zones), &zones).unwrap();

        let mut sums = vec![(0.0, 0usize); nz];
        for (i, p) in pts.iter().enumerate() {
            let Some(z) = rings.iter().position(|r| ray_cast(r, *p)) else { continue };
            if let Some(s) = field.scores[i] {
                sums[z].0 += s;
                sums[z].1 += 1;
            }
        }
        let mut with_data: Vec<(f64, &str)> = Vec::new();
        for (z, a) in aggs.iter().enumerate() {
            prop_assert_eq!(a.point_count, sums[z].1);
            match a.mean_score {
                Some(m) => {
                    prop_assert!((m - sums[z].0 / sums[z].1 as f64).abs() <= 1e-12);
                    with_data.push((m, &a.zone_id));
                }
                None => prop_assert_eq!(sums[z].1, 0),
            }
        }
        with_data.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        for (r, (_, id)) in with_data.iter().enumerate() {
            let a = aggs.iter().find(|a| a.zone_id == *id).unwrap();
            let expect = if with_data.len() == 1 { 1.0 } else { r as f64 / (with_data.len() - 1) as f64 };
            prop_assert_eq!(a.percentile_rank, Some(expect));
        }
        let scored: Vec<f64> = (0..n).filter_map(|i| field.scores[i]).collect();
        if !scored.is_empty() {
            let rg = aggregate_graph(&field).unwrap();
            prop_assert!((rg - scored.iter().sum::<f64>() / scored.len() as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn scaling_vote_counts_keeps_zone_ranking(seed in any::<u64>(), k in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 5;
        let plant = random_weights(&mut rng, n);
        let mut votes = sample_votes(&mut rng, &plant, 400, 5);
        let f = ids(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    votes.push(PairwiseVote::new("seed", &f[i], &f[j], &f[i]));
                }
            }
        }
        let scaled: Vec<PairwiseVote> = votes.iter().flat_map(|v| std::iter::repeat(v.clone()).take(k)).collect();
        let pts = random_points(&mut rng, 300, 0.0, 100.0);
        let x: Vec<Vec<Option<f64>>> = (0..n).map(|_| (0..300).map(|_| Some(rng.gen_range(0.0..=1.0))).collect()).collect();
        let (zones, _) = random_zones(&mut rng, 10);
        let assign = ZoneAssignment::new(&pts, &zones);
        let pol: BTreeMap<String, Polarity> = f.iter().map(|id| (id.clone(), Polarity::Positive)).collect();
        let rank = |vs: &[PairwiseVote]| {
            let m = ContingencyMatrix::build(vs, &f, 0.0, UncomparedPolicy::Error).unwrap();
            let w = principal_weights(&m).unwrap();
            let fm = FeatureMatrix::from_values(f.clone(), x.clone()).unwrap();
            let field = score_points(&fm, &w, &pol, MissingPolicy::Renormalize).unwrap();
            let aggs = aggregate_zones(&field, &assign, &zones).unwrap();
            let r = rank_zones(&aggs, 0.5).unwrap();
            let ids = |v: &[robotability_core::scoring::ZoneAggregate]| v.iter().map(|z| z.zone_id.clone()).collect::<Vec<_>>();
            (w.ranking(), ids(&r.top), ids(&r.bottom))
        };
        prop_assert_eq!(rank(&votes), rank(&scaled));
    }
}

#[test]
fn worked_examples() {
    let one = Instance { x: vec![vec![Some(0.7)]], w: vec![1.0], p: vec![1.0] };
    assert_eq!(engine(&one, false, MissingPolicy::Renormalize).scores, vec![Some(0.7)]);
    let two = Instance { x: vec![vec![Some(1.0)], vec![Some(0.5)]], w: vec![0.6, 0.4], p: vec![1.0, -1.0] };
    assert_close(engine(&two, false, MissingPolicy::Renormalize).scores[0].unwrap(), 0.4, 1e-15, "two features");
    let gap = Instance { x: vec![vec![Some(1.0)], vec![None]], w: vec![0.6, 0.4], p: vec![1.0, -1.0] };
    assert_eq!(engine(&gap, false, MissingPolicy::Renormalize).scores, vec![Some(1.0)]);
    assert_eq!(engine(&gap, false, MissingPolicy::PropagateMissing).scores, vec![None]);
    assert_close(engine(&gap, false, MissingPolicy::ZeroFill).scores[0].unwrap(), 0.6, 1e-15, "zero fill");
}
