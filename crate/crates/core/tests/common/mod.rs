//! Test-side reference computations. These deliberately avoid the library's
//! linear algebra and operator code so they can serve as independent checks.

#![allow(dead_code)]

use pi_bounds::mdp::MdpJson;
use pi_bounds::{Family, GenSpec, Mdp, Policy};

/// Plenty for `gamma <= 0.99` at double precision.
const STEP_CAP: usize = 100_000;

pub struct Nested {
    pub gamma: f64,
    pub p: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
}

/// Reads the model back through its JSON form.
pub fn nested(mdp: &Mdp) -> Nested {
    let json: MdpJson = serde_json::from_str(&mdp.to_json()).unwrap();
    Nested {
        gamma: json.gamma,
        p: json.transitions,
        r: json.rewards,
    }
}

fn backup(m: &Nested, i: usize, a: usize, v: &[f64]) -> f64 {
    let ev: f64 = m.p[i][a].iter().zip(v).map(|(p, x)| p * x).sum();
    m.r[i][a] + m.gamma * ev
}

/// `v_pi` by fixed-point iteration of `T_pi`.
pub fn iterate_policy(mdp: &Mdp, pi: &Policy) -> Vec<f64> {
    let m = nested(mdp);
    let n = m.p.len();
    let mut v = vec![0.0; n];
    for _ in 0..STEP_CAP {
        let next: Vec<f64> = (0..n).map(|i| backup(&m, i, pi[i], &v)).collect();
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta <= 1e-15 * (1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    v
}

/// `v_*` by value iteration, run until the update stalls.
pub fn iterate_optimal(mdp: &Mdp) -> Vec<f64> {
    let m = nested(mdp);
    let n = m.p.len();
    let mut v = vec![0.0; n];
    for _ in 0..STEP_CAP {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                (0..m.r[i].len())
                    .map(|a| backup(&m, i, a, &v))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta <= 1e-15 * (1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
            break;
        }
    }
    v
}

/// `max_a Q(i, a) - v(i)` by explicit loops.
pub fn brute_advantage(mdp: &Mdp, v: &[f64]) -> Vec<f64> {
    let m = nested(mdp);
    (0..v.len())
        .map(|i| {
            (0..m.r[i].len())
                .map(|a| backup(&m, i, a, v))
                .fold(f64::NEG_INFINITY, f64::max)
                - v[i]
        })
        .collect()
}

/// Successor map of a deterministic policy.
pub fn successors(mdp: &Mdp, pi: &Policy) -> Vec<usize> {
    let m = nested(mdp);
    (0..m.p.len())
        .map(|i| m.p[i][pi[i]].iter().position(|&p| p == 1.0).unwrap())
        .collect()
}

/// Cycles of a functional graph, found by walking `n` steps from every state.
pub fn cycles(succ: &[usize]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut found: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        let mut s = start;
        for _ in 0..n {
            s = succ[s];
        }
        let mut cycle = vec![s];
        let mut t = succ[s];
        while t != s {
            cycle.push(t);
            t = succ[t];
        }
        cycle.sort_unstable();
        if !found.contains(&cycle) {
            found.push(cycle);
        }
    }
    found.sort();
    found
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn family(k: u8, n: usize) -> Family {
    match k % 3 {
        0 => Family::DenseRandom,
        1 => Family::Deterministic,
        _ => Family::Garnet {
            branching: 1 + n / 2,
        },
    }
}

pub fn instance(k: u8, n: usize, m: usize, gamma: f64, seed: u64) -> Mdp {
    pi_bounds::generators::generate(&GenSpec::new(family(k, n), n, m, gamma, seed)).unwrap()
}

/// A policy derived from a seed without touching the library RNG.
pub fn policy_from_seed(n: usize, m: usize, seed: u64) -> Policy {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    Policy(
        (0..n)
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                (x % m as u64) as usize
            })
            .collect(),
    )
}
