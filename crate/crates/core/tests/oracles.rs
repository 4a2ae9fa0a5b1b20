mod common;

use common::*;
use pi_bounds::bellman;
use pi_bounds::generators::generate;
use pi_bounds::solvers::{run, RunOptions, Variant};
use pi_bounds::structure::{self, check_assumption2, classify, structural_constants, DEFAULT_BUDGET};
use pi_bounds::verify::enumeration_oracle;
use pi_bounds::{Family, GenSpec, PolicyEnumerator};

const GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];

#[test]
fn evaluation_matches_fixed_point_iteration() {
    for seed in 0..60u64 {
        let n = 1 + (seed % 7) as usize;
        let m = 1 + (seed % 3) as usize;
        let mdp = instance(seed as u8, n, m, GAMMAS[(seed % 3) as usize], seed);
        let pi = policy_from_seed(n, m, seed);
        let v = bellman::policy_evaluation(&mdp, &pi).unwrap();
        let reference = iterate_policy(&mdp, &pi);
        let err = max_abs_diff(&v, &reference);
        assert!(err <= 1e-8 * (1.0 + norm_inf(&reference)), "seed {seed}: {err:e}");
    }
}

#[test]
fn advantage_matches_explicit_backup() {
    for seed in 0..60u64 {
        let n = 2 + (seed % 6) as usize;
        let m = 2 + (seed % 2) as usize;
        let mdp = instance(seed as u8, n, m, 0.9, seed);
        let pi = policy_from_seed(n, m, seed + 1);
        let v = bellman::policy_evaluation(&mdp, &pi).unwrap();
        let adv = bellman::advantage(&mdp, &pi).unwrap();
        let reference = brute_advantage(&mdp, &v);
        for (a, r) in adv.iter().zip(&reference) {
            assert!((a - r.max(0.0)).abs() <= 1e-9 * (1.0 + v.norm_inf()), "seed {seed}");
        }
    }
}

#[test]
fn both_variants_reach_value_iteration_optimum() {
    for seed in 0..90u64 {
        let n = 1 + (seed % 5) as usize;
        let m = 1 + (seed % 3) as usize;
        let gamma = GAMMAS[(seed / 3 % 3) as usize];
        let mdp = instance(seed as u8, n, m, gamma, seed);
        let v_star = iterate_optimal(&mdp);
        let scale = 1.0 + norm_inf(&v_star);
        let exhaustive = enumeration_oracle(&mdp).unwrap();
        assert!(max_abs_diff(&exhaustive.value, &v_star) <= 1e-8 * scale);
        for variant in Variant::ALL {
            let trace = run(&mdp, &policy_from_seed(n, m, seed), variant, &RunOptions::default()).unwrap();
            let err = max_abs_diff(&trace.final_value, &v_star);
            assert!(err <= 1e-8 * scale, "seed {seed} {variant}: {err:e}");
        }
    }
}

#[test]
fn classification_matches_cycle_walk_on_deterministic_models() {
    for seed in 0..40u64 {
        let n = 1 + (seed % 8) as usize;
        let m = 1 + (seed % 3) as usize;
        let mdp = generate(&GenSpec::new(Family::Deterministic, n, m, 0.9, seed)).unwrap();
        let pi = policy_from_seed(n, m, seed);
        let expected = cycles(&successors(&mdp, &pi));
        let cls = classify(&mdp, &pi);
        let mut got: Vec<Vec<usize>> = cls.classes.iter().map(|c| c.states.clone()).collect();
        got.sort();
        assert_eq!(got, expected, "seed {seed}");
        for i in 0..n {
            let on_cycle = expected.iter().any(|c| c.contains(&i));
            assert_eq!(cls.is_recurrent(i), on_cycle);
        }
    }
}

#[test]
fn deterministic_models_have_tau_at_most_n() {
    for seed in 0..30u64 {
        let n = 2 + (seed % 4) as usize;
        let m = 1 + (seed % 3) as usize;
        for gamma in GAMMAS {
            let mdp = generate(&GenSpec::new(Family::Deterministic, n, m, gamma, seed)).unwrap();
            let report = structural_constants(&mdp, DEFAULT_BUDGET).unwrap();
            let nf = n as f64;
            assert!(report.tau_t <= nf + 1e-9, "tau_t {} > n", report.tau_t);
            assert!(report.tau_r <= nf + 1e-9, "tau_r {} > n", report.tau_r);
        }
    }
}

#[test]
fn two_block_models_satisfy_assumption2() {
    for seed in 0..30u64 {
        let t = (seed % 3) as usize;
        let r = 1 + (seed % 2) as usize;
        let spec = GenSpec::new(
            Family::TwoBlockAssumption2 {
                transient: t,
                recurrent: r,
            },
            t + r,
            1 + (seed % 3) as usize,
            0.9,
            seed,
        );
        let mdp = generate(&spec).unwrap();
        let partition = check_assumption2(&mdp, DEFAULT_BUDGET).unwrap().unwrap();
        assert_eq!(partition.transient, (0..t).collect::<Vec<_>>());
        assert_eq!(partition.recurrent, (t..t + r).collect::<Vec<_>>());
        let report = structural_constants(&mdp, DEFAULT_BUDGET).unwrap();
        assert!(report.assumption2_holds);
        assert!(structure::check_assumption1(&mdp, &report).unwrap().is_none());
    }
}

#[test]
fn structural_constants_match_direct_enumeration() {
    for seed in 0..20u64 {
        let n = 2 + (seed % 3) as usize;
        let m = 1 + (seed % 3) as usize;
        let mdp = instance(seed as u8, n, m, 0.9, seed);
        let (mut tau_t, mut tau_r) = (1.0f64, 1.0f64);
        let scale = n as f64 / (1.0 - mdp.gamma());
        for pi in PolicyEnumerator::new(n, m) {
            // visitation through value iteration on the reversed chain
            let x = visitation_by_iteration(&mdp, &pi);
            let cls = classify(&mdp, &pi);
            for (i, &xi) in x.iter().enumerate() {
                if cls.is_recurrent(i) {
                    tau_r = tau_r.max(scale / xi);
                } else {
                    tau_t = tau_t.max(xi);
                }
            }
        }
        let report = structural_constants(&mdp, DEFAULT_BUDGET).unwrap();
        assert!((report.tau_t - tau_t).abs() <= 1e-8 * tau_t, "seed {seed}");
        assert!((report.tau_r - tau_r).abs() <= 1e-8 * tau_r, "seed {seed}");
    }
}

/// `x = 1 + gamma P^T x`, iterated.
fn visitation_by_iteration(mdp: &pi_bounds::Mdp, pi: &pi_bounds::Policy) -> Vec<f64> {
    let m = nested(mdp);
    let n = m.p.len();
    let mut x = vec![1.0; n];
    for _ in 0..2_000 {
        let mut next = vec![1.0; n];
        for (i, row) in (0..n).map(|i| (i, &m.p[i][pi[i]])) {
            for (j, p) in row.iter().enumerate() {
                next[j] += m.gamma * p * x[i];
            }
        }
        x = next;
    }
    x
}
