mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robotability_core::ahp::{
    principal_weights, subset_weights, transitivity_report, ContingencyMatrix, PairwiseVote, UncomparedPolicy,
};

fn build(votes: &[PairwiseVote], n: usize, s: f64) -> ContingencyMatrix {
    ContingencyMatrix::build(votes, &ids(n), s, UncomparedPolicy::NeutralFill).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matrix_is_reciprocal_and_weights_normalized(seed in any::<u64>(), n in 2usize..9, nv in 0usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let votes = random_votes(&mut rng, n, nv, 5);
        let m = build(&votes, n, 1.0);
        for i in 0..n {
            prop_assert_eq!(m.entry(i, i), 1.0);
            for j in 0..n {
                prop_assert!(m.entry(i, j) > 0.0);
                prop_assert!((m.entry(i, j) * m.entry(j, i) - 1.0).abs() <= 1e-12);
            }
        }
        let w = principal_weights(&m).unwrap();
        prop_assert!((w.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.weights().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn consistent_matrix_recovers_plant(seed in any::<u64>(), n in 2usize..11) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plant = random_weights(&mut rng, n);
        let m = ContingencyMatrix::from_weights(ids(n), &plant).unwrap();
        let w = principal_weights(&m).unwrap();
        for (a, b) in w.weights().iter().zip(&plant) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn relabeling_permutes_weights(seed in any::<u64>(), n in 2usize..8, nv in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let votes = random_votes(&mut rng, n, nv, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let f = ids(n);
        let g: Vec<String> = (0..n).map(|i| format!("g{}", perm[i])).collect();
        let rename = |s: &str| g[f.iter().position(|x| x == s).unwrap()].clone();
        let renamed: Vec<PairwiseVote> = votes
            .iter()
            .map(|v| PairwiseVote::new(&v.rater_id, &rename(&v.feature_a), &rename(&v.feature_b), &rename(&v.chosen)))
            .collect();
        let w1 = principal_weights(&build(&votes, n, 1.0)).unwrap();
        let m2 = ContingencyMatrix::build(&renamed, &g, 1.0, UncomparedPolicy::NeutralFill).unwrap();
        let w2 = principal_weights(&m2).unwrap();
        for i in 0..n {
            let a = w1.get(&f[i]).unwrap();
            let b = w2.get(&g[i]).unwrap();
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn duplicating_every_vote_keeps_unsmoothed_weights(seed in any::<u64>(), n in 2usize..7, k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plant = random_weights(&mut rng, n);
        let mut votes = sample_votes(&mut rng, &plant, 60 * n * n, 4);
        // every ordered pair gets a win so no entry is zero or infinite
        let f = ids(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    votes.push(PairwiseVote::new("seed", &f[i], &f[j], &f[i]));
                }
            }
        }
        let base = principal_weights(&build(&votes, n, 0.0)).unwrap();
        let scaled: Vec<PairwiseVote> = votes.iter().flat_map(|v| std::iter::repeat(v.clone()).take(k)).collect();
        let w = principal_weights(&build(&scaled, n, 0.0)).unwrap();
        for (a, b) in base.weights().iter().zip(w.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn subset_weights_equal_submatrix_solve(seed in any::<u64>(), n in 3usize..10, nv in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let votes = random_votes(&mut rng, n, nv, 4);
        let m = build(&votes, n, 1.0);
        let f = ids(n);
        let keep: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        prop_assume!(keep.len() >= 2);
        let keep_ids: BTreeSet<String> = keep.iter().map(|&i| f[i].clone()).collect();
        let got = subset_weights(&m, &keep_ids).unwrap();

        let sub_ids: Vec<String> = keep.iter().map(|&i| f[i].clone()).collect();
        let entries: Vec<f64> = keep.iter().flat_map(|&i| keep.iter().map(move |&j| (i, j))).map(|(i, j)| m.entry(i, j)).collect();
        let sub = ContingencyMatrix::from_entries(sub_ids.clone(), entries.clone(), m.smoothing()).unwrap();
        let oracle = principal_weights(&sub).unwrap();
        prop_assert_eq!(got.features(), oracle.features());
        prop_assert_eq!(got.weights(), oracle.weights());

        let dense: Vec<Vec<f64>> = entries.chunks(keep.len()).map(|r| r.to_vec()).collect();
        let slow = power_iteration(&dense, 5000);
        for (a, b) in got.weights().iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn transitivity_matches_brute_force(seed in any::<u64>(), n in 3usize..9, nv in 0usize..250) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let votes = random_votes(&mut rng, n, nv, 4);
        let f = ids(n);
        let rep = transitivity_report(&votes, &f).unwrap();
        let all: Vec<&PairwiseVote> = votes.iter().collect();
        let (eval, cyc) = brute_force_cycles(&all, &f);
        prop_assert_eq!(rep.triples_evaluated, eval);
        prop_assert_eq!(rep.inter_rater_violations, cyc);
        for (rater, count) in &rep.intra_rater {
            let mine: Vec<&PairwiseVote> = votes.iter().filter(|v| &v.rater_id == rater).collect();
            prop_assert_eq!(*count, brute_force_cycles(&mine, &f).1);
        }
    }
}

#[test]
fn monte_carlo_votes_recover_planted_weights() {
    let plant = [0.4, 0.25, 0.15, 0.12, 0.08];
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let votes = sample_votes(&mut rng, &plant, 10_000, 50);
        let w = principal_weights(&build(&votes, 5, 1.0)).unwrap();
        assert_eq!(w.ranking(), vec![0, 1, 2, 3, 4], "seed {seed}: {:?}", w.weights());
        for (a, b) in w.weights().iter().zip(plant) {
            assert_close(*a, b, 0.05, &format!("seed {seed}"));
        }
    }
}

#[test]
fn three_cycle_is_one_violation() {
    let v = vec![
        PairwiseVote::new("r", "f0", "f1", "f0"),
        PairwiseVote::new("r", "f1", "f2", "f1"),
        PairwiseVote::new("r", "f0", "f2", "f2"),
    ];
    let rep = transitivity_report(&v, &ids(3)).unwrap();
    assert_eq!(rep.inter_rater_violations, 1);
    assert_eq!(rep.intra_rater["r"], 1);
}

#[test]
fn brute_force_oracle_sanity() {
    let v = [
        PairwiseVote::new("r", "f0", "f1", "f0"),
        PairwiseVote::new("r", "f1", "f2", "f1"),
        PairwiseVote::new("r", "f0", "f2", "f0"),
    ];
    let refs: Vec<&PairwiseVote> = v.iter().collect();
    assert_eq!(brute_force_cycles(&refs, &ids(3)), (1, 0));
}
