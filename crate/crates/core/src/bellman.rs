//! Exact Bellman machinery: policy evaluation, the operators `T_pi` and `T`,
//! greedy policies, advantages, switchable sets and `switch(pi, Y)`.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{Advantage, Mdp, Policy, ValueFunction};

/// Threshold used to decide whether an advantage is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Tolerance {
    Absolute(f64),
    /// `rel * (1 + scale)`, where `scale` is `||v_pi||_inf`.
    Relative(f64),
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Relative(1e-10)
    }
}

impl Tolerance {
    pub fn threshold(self, scale: f64) -> f64 {
        match self {
            Tolerance::Absolute(t) => t,
            Tolerance::Relative(r) => r * (1.0 + scale),
        }
    }
}

/// Solves `(I - gamma P_pi) v = r_pi` by dense LU.
pub fn policy_evaluation(mdp: &Mdp, pi: &Policy) -> Result<ValueFunction> {
    mdp.check_policy(pi)?;
    let a = linalg::evaluation_matrix(mdp, pi);
    let r = linalg::policy_rewards(mdp, pi);
    let v = linalg::solve(a, &r)?;
    let v = ValueFunction(v.iter().copied().collect());
    let residual = bellman_residual(mdp, pi, &v);
    if residual > 1e-10 * (1.0 + v.norm_inf()) {
        return Err(Error::Internal(format!(
            "policy evaluation residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(v)
}

/// `||v - T_pi v||_inf`.
pub fn bellman_residual(mdp: &Mdp, pi: &Policy, v: &[f64]) -> f64 {
    (0..mdp.n())
        .map(|i| (v[i] - mdp.q_value(i, pi[i], v)).abs())
        .fold(0.0, f64::max)
}

/// `T_pi v = r_pi + gamma P_pi v`.
pub fn apply_t_pi(mdp: &Mdp, pi: &Policy, v: &[f64]) -> ValueFunction {
    ValueFunction((0..mdp.n()).map(|i| mdp.q_value(i, pi[i], v)).collect())
}

/// `T v`, the componentwise max over actions, with a lowest-index maximizer.
pub fn apply_t(mdp: &Mdp, v: &[f64]) -> (ValueFunction, Policy) {
    let mut values = Vec::with_capacity(mdp.n());
    let mut actions = Vec::with_capacity(mdp.n());
    for i in 0..mdp.n() {
        let (best_a, best_q) = best_action(mdp, i, v);
        values.push(best_q);
        actions.push(best_a);
    }
    (ValueFunction(values), Policy(actions))
}

fn best_action(mdp: &Mdp, state: usize, v: &[f64]) -> (usize, f64) {
    let mut best = (0, mdp.q_value(state, 0, v));
    for a in 1..mdp.m() {
        let q = mdp.q_value(state, a, v);
        if q > best.1 {
            best = (a, q);
        }
    }
    best
}

/// Greedy policy w.r.t. `v`: keeps `current(i)` when it attains the max within
/// `threshold`, otherwise takes the lowest-index maximizing action.
pub fn greedy(mdp: &Mdp, v: &[f64], current: &Policy, threshold: f64) -> Policy {
    Policy(
        (0..mdp.n())
            .map(|i| {
                let (best_a, best_q) = best_action(mdp, i, v);
                if mdp.q_value(i, current[i], v) >= best_q - threshold {
                    current[i]
                } else {
                    best_a
                }
            })
            .collect(),
    )
}

/// Advantage `a_pi = T v_pi - v_pi` given an already computed `v_pi`.
///
/// Components below `-1e-10 (1 + ||v_pi||_inf)` are an internal error; small
/// negative rounding noise is clamped to zero.
pub fn advantage_from_value(mdp: &Mdp, v: &ValueFunction) -> Result<Advantage> {
    let floor = -1e-10 * (1.0 + v.norm_inf());
    let (tv, _) = apply_t(mdp, v);
    let mut out = Vec::with_capacity(mdp.n());
    for (i, (t, x)) in tv.iter().zip(v.iter()).enumerate() {
        let a = t - x;
        if a < floor {
            return Err(Error::NegativeAdvantage { state: i, value: a });
        }
        out.push(a.max(0.0));
    }
    Ok(Advantage(out))
}

pub fn advantage(mdp: &Mdp, pi: &Policy) -> Result<Advantage> {
    let v = policy_evaluation(mdp, pi)?;
    advantage_from_value(mdp, &v)
}

/// `{ i : a_pi(i) > tol }`.
pub fn switchable_set(mdp: &Mdp, pi: &Policy, tol: f64) -> Result<BTreeSet<usize>> {
    let adv = advantage(mdp, pi)?;
    Ok(switchable_from_advantage(&adv, tol))
}

pub fn switchable_from_advantage(adv: &Advantage, tol: f64) -> BTreeSet<usize> {
    adv.iter()
        .enumerate()
        .filter(|(_, &a)| a > tol)
        .map(|(i, _)| i)
        .collect()
}

/// `switch(pi, Y)`: `greedy` on `Y`, `pi` elsewhere.
///
/// `switchable` is the switchable set of `pi`; `Y` must be a non-empty subset.
pub fn switch(
    pi: &Policy,
    greedy: &Policy,
    y: &BTreeSet<usize>,
    switchable: &BTreeSet<usize>,
) -> Result<Policy> {
    if y.is_empty() {
        return Err(Error::EmptySwitchSet);
    }
    if let Some(&bad) = y.iter().find(|i| !switchable.contains(i)) {
        return Err(Error::NotSwitchable(bad));
    }
    let mut next = pi.clone();
    for &i in y {
        next.0[i] = greedy[i];
    }
    Ok(next)
}

/// `(I - gamma P_pi)^{-1} b`, used by identity checks.
pub fn resolvent_apply(mdp: &Mdp, pi: &Policy, b: &[f64]) -> Result<Vec<f64>> {
    let a = linalg::evaluation_matrix(mdp, pi);
    let x = linalg::solve(a, &DVector::from_column_slice(b))?;
    Ok(x.iter().copied().collect())
}
