//! Howard's policy iteration and Simplex policy iteration with per-iteration
//! tracing.
//!
//! Both variants follow `pi_{k+1} = switch(pi_k, Y_k)`: Howard's PI takes `Y_k`
//! to be the whole switchable set, Simplex-PI the single state of maximal
//! advantage (lowest index on ties). A run stops when no advantage exceeds the
//! tolerance.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bellman::{self, Tolerance};
use crate::bounds;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{Advantage, Mdp, Policy, ValueFunction};
use crate::structure::{self, Classification, Events, RecurrentClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Howard,
    Simplex,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Howard, Variant::Simplex];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Howard => "howard",
            Variant::Simplex => "simplex",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "howard" => Ok(Variant::Howard),
            "simplex" => Ok(Variant::Simplex),
            other => Err(format!("unknown variant '{other}' (expected howard or simplex)")),
        }
    }
}

/// What a single step learned about the current policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub value: ValueFunction,
    pub advantage: Advantage,
    pub switchable: BTreeSet<usize>,
    pub max_advantage: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Terminated(StepInfo),
    Switched {
        policy: Policy,
        switched: Vec<usize>,
        info: StepInfo,
    },
}

fn analyze(mdp: &Mdp, value: ValueFunction, tol: Tolerance) -> Result<StepInfo> {
    let advantage = bellman::advantage_from_value(mdp, &value)?;
    let threshold = tol.threshold(value.norm_inf());
    let switchable = bellman::switchable_from_advantage(&advantage, threshold);
    let max_advantage = advantage.iter().copied().fold(0.0, f64::max);
    Ok(StepInfo {
        value,
        advantage,
        switchable,
        max_advantage,
        threshold,
    })
}

fn step_from_value(
    mdp: &Mdp,
    pi: &Policy,
    value: ValueFunction,
    variant: Variant,
    tol: Tolerance,
) -> Result<Step> {
    let info = analyze(mdp, value, tol)?;
    if info.switchable.is_empty() {
        return Ok(Step::Terminated(info));
    }
    let greedy = bellman::greedy(mdp, &info.value, pi, info.threshold);
    let y: BTreeSet<usize> = match variant {
        Variant::Howard => info.switchable.clone(),
        Variant::Simplex => {
            let mut best = *info.switchable.first().expect("non-empty");
            for &i in &info.switchable {
                if info.advantage[i] > info.advantage[best] {
                    best = i;
                }
            }
            [best].into()
        }
    };
    let policy = bellman::switch(pi, &greedy, &y, &info.switchable)?;
    let switched: Vec<usize> = y.into_iter().collect();
    if let Some(&i) = switched.iter().find(|&&i| policy[i] == pi[i]) {
        return Err(Error::Internal(format!(
            "greedy action at switchable state {i} equals the current action"
        )));
    }
    Ok(Step::Switched {
        policy,
        switched,
        info,
    })
}

/// One step of Howard's PI: switch every state with positive advantage.
pub fn howard_step(mdp: &Mdp, pi: &Policy, tol: Tolerance) -> Result<Step> {
    let v = bellman::policy_evaluation(mdp, pi)?;
    step_from_value(mdp, pi, v, Variant::Howard, tol)
}

/// One step of Simplex-PI: switch the single state of maximal advantage.
pub fn simplex_step(mdp: &Mdp, pi: &Policy, tol: Tolerance) -> Result<Step> {
    let v = bellman::policy_evaluation(mdp, pi)?;
    step_from_value(mdp, pi, v, Variant::Simplex, tol)
}

/// Keeps `(I - gamma P_pi)^{-1}` for the current policy so that a single-row
/// policy change costs `O(n^2)` instead of a fresh `O(n^3)` solve.
#[derive(Debug, Clone)]
pub struct IncrementalEvaluator {
    inverse: DMatrix<f64>,
    rewards: DVector<f64>,
    policy: Policy,
    gamma: f64,
}

impl IncrementalEvaluator {
    pub fn new(mdp: &Mdp, pi: &Policy) -> Result<Self> {
        mdp.check_policy(pi)?;
        Ok(IncrementalEvaluator {
            inverse: linalg::invert(linalg::evaluation_matrix(mdp, pi))?,
            rewards: linalg::policy_rewards(mdp, pi),
            policy: pi.clone(),
            gamma: mdp.gamma(),
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn value(&self) -> ValueFunction {
        ValueFunction((&self.inverse * &self.rewards).iter().copied().collect())
    }

    /// Switches `state` to `action`, updating the cached inverse with a
    /// rank-one correction and checking the Bellman residual of the result.
    pub fn switch_action(&mut self, mdp: &Mdp, state: usize, action: usize) -> Result<()> {
        let old = mdp.row(state, self.policy[state]);
        let new = mdp.row(state, action);
        let delta = DVector::from_iterator(mdp.n(), new.iter().zip(old).map(|(a, b)| a - b));
        linalg::rank_one_row_update(&mut self.inverse, state, -self.gamma, &delta)?;
        self.policy.0[state] = action;
        self.rewards[state] = mdp.reward(state, action);

        let v = self.value();
        let residual = bellman::bellman_residual(mdp, &self.policy, &v);
        if residual.is_nan() || residual > 1e-9 * (1.0 + v.norm_inf()) {
            return Err(Error::CacheInconsistent { residual });
        }
        Ok(())
    }
}

/// Simplex step that evaluates through `evaluator` and, on a switch, updates
/// it in place. On `CacheInconsistent` the caller must rebuild the evaluator.
pub fn simplex_step_sm(mdp: &Mdp, evaluator: &mut IncrementalEvaluator, tol: Tolerance) -> Result<Step> {
    let pi = evaluator.policy().clone();
    let step = step_from_value(mdp, &pi, evaluator.value(), Variant::Simplex, tol)?;
    if let Step::Switched {
        ref policy,
        ref switched,
        ..
    } = step
    {
        let s = switched[0];
        evaluator.switch_action(mdp, s, policy[s])?;
    }
    Ok(step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// Dense LU solve of every policy.
    #[default]
    Fresh,
    /// Rank-one inverse updates (Simplex-PI only).
    ShermanMorrison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub tol: Tolerance,
    /// `None` selects the tightest gamma-dependent bound plus one.
    pub max_iter: Option<usize>,
    /// Full value vectors are kept in the trace only up to this many states.
    pub store_values_up_to: usize,
    /// Classify recurrent classes after every iteration and record events.
    pub track_structure: bool,
    pub evaluation: Evaluation,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tol: Tolerance::default(),
            max_iter: None,
            store_values_up_to: 64,
            track_structure: true,
            evaluation: Evaluation::Fresh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub policy_before: Policy,
    pub policy_after: Policy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_before: Option<ValueFunction>,
    /// `1^T v_{pi_k}`.
    pub value_sum: f64,
    pub max_advantage: f64,
    pub switched_states: Vec<usize>,
    pub switchable_count: usize,
    pub recurrent_classes_after: Vec<RecurrentClass>,
    pub events: Events,
    /// `||v_final - v_{pi_k}||_inf`, filled once the run completes.
    pub gap_inf: f64,
    /// `1^T (v_final - v_{pi_k})`.
    pub gap_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub variant: Variant,
    pub records: Vec<IterationRecord>,
    pub initial_policy: Policy,
    pub initial_classes: Vec<RecurrentClass>,
    pub final_policy: Policy,
    pub final_value: ValueFunction,
    /// `||T v - v||_inf` at the final policy.
    pub final_residual: f64,
    /// Number of switching iterations.
    pub iterations: usize,
    /// True when the run stopped at `max_iter` without terminating.
    pub truncated: bool,
    pub cache_rebuilds: usize,
}

impl RunTrace {
    /// Policies `pi_0, ..., pi_K`.
    pub fn policies(&self) -> Vec<&Policy> {
        let mut out: Vec<&Policy> = self.records.iter().map(|r| &r.policy_before).collect();
        out.push(&self.final_policy);
        out
    }

    /// Value vectors `v_{pi_0}, ..., v_{pi_K}` when they were stored.
    pub fn values(&self) -> Option<Vec<&ValueFunction>> {
        let mut out = Vec::with_capacity(self.records.len() + 1);
        for r in &self.records {
            out.push(r.value_before.as_ref()?);
        }
        out.push(&self.final_value);
        Some(out)
    }

    pub fn event_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.events.new_recurrent_class)
            .count()
    }

    /// Checks the structural trace invariants: monotone values, no repeated
    /// policy, Simplex switches one state, Howard switches all of `S_pi`.
    pub fn check_invariants(&self) -> Result<()> {
        let policies = self.policies();
        let unique: BTreeSet<&Policy> = policies.iter().copied().collect();
        if unique.len() != policies.len() {
            return Err(Error::Internal("a policy repeats within the trace".into()));
        }
        let sums: Vec<f64> = self
            .records
            .iter()
            .map(|r| r.value_sum)
            .chain(std::iter::once(self.final_value.sum()))
            .collect();
        if let Some(values) = self.values() {
            for (k, w) in values.windows(2).enumerate() {
                if let Some(i) = (0..w[0].len()).find(|&i| w[1][i] < w[0][i] - 1e-9) {
                    return Err(Error::Internal(format!(
                        "value decreased at state {i} in iteration {k}"
                    )));
                }
            }
        } else if let Some(k) = sums.windows(2).position(|w| w[1] < w[0] - 1e-9) {
            return Err(Error::Internal(format!("value sum decreased in iteration {k}")));
        }
        for r in &self.records {
            let expected = match self.variant {
                Variant::Simplex => 1,
                Variant::Howard => r.switchable_count,
            };
            if r.switched_states.len() != expected || r.switched_states.is_empty() {
                return Err(Error::Internal(format!(
                    "iteration {} switched {} states, expected {expected}",
                    r.k,
                    r.switched_states.len()
                )));
            }
        }
        Ok(())
    }
}

enum Evaluator {
    Fresh,
    Incremental(IncrementalEvaluator),
}

/// Runs policy iteration from `pi0` until no state is switchable or the
/// iteration cap is hit (`MaxIterExceeded`, carrying the partial trace).
pub fn run(mdp: &Mdp, pi0: &Policy, variant: Variant, opts: &RunOptions) -> Result<RunTrace> {
    mdp.check_policy(pi0)?;
    let max_iter = opts
        .max_iter
        .unwrap_or_else(|| bounds::default_max_iter(mdp.n(), mdp.m(), mdp.gamma(), variant));
    let mut evaluator = match opts.evaluation {
        Evaluation::Fresh => Evaluator::Fresh,
        Evaluation::ShermanMorrison if variant == Variant::Simplex => {
            Evaluator::Incremental(IncrementalEvaluator::new(mdp, pi0)?)
        }
        Evaluation::ShermanMorrison => {
            return Err(Error::InvalidSpec(
                "rank-one incremental evaluation only applies to Simplex-PI".into(),
            ))
        }
    };
    let deterministic = opts.track_structure && mdp.is_deterministic();
    let classify = |pi: &Policy| -> Classification {
        if opts.track_structure {
            structure::classify(mdp, pi)
        } else {
            Classification {
                labels: Vec::new(),
                classes: Vec::new(),
            }
        }
    };

    let mut pi = pi0.clone();
    let mut classes = classify(&pi);
    let initial_classes = classes.classes.clone();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut values: Vec<ValueFunction> = Vec::new();
    let mut cache_rebuilds = 0;

    let (final_value, final_residual, truncated) = loop {
        let step = match &mut evaluator {
            Evaluator::Fresh => {
                let v = bellman::policy_evaluation(mdp, &pi)?;
                step_from_value(mdp, &pi, v, variant, opts.tol)?
            }
            Evaluator::Incremental(inc) => match simplex_step_sm(mdp, inc, opts.tol) {
                Err(Error::CacheInconsistent { .. }) | Err(Error::SingularSystem) => {
                    cache_rebuilds += 1;
                    *inc = IncrementalEvaluator::new(mdp, &pi)?;
                    simplex_step_sm(mdp, inc, opts.tol)?
                }
                other => other?,
            },
        };
        match step {
            Step::Terminated(info) => break (info.value, info.max_advantage, false),
            Step::Switched { .. } if records.len() >= max_iter => {
                let Step::Switched { info, .. } = step else {
                    unreachable!()
                };
                break (info.value, info.max_advantage, true);
            }
            Step::Switched {
                policy,
                switched,
                info,
            } => {
                let next_classes = classify(&policy);
                let events = structure::diff_classes(&classes, &next_classes, deterministic);
                records.push(IterationRecord {
                    k: records.len(),
                    policy_before: pi.clone(),
                    policy_after: policy.clone(),
                    value_before: None,
                    value_sum: info.value.sum(),
                    max_advantage: info.max_advantage,
                    switched_states: switched,
                    switchable_count: info.switchable.len(),
                    recurrent_classes_after: next_classes.classes.clone(),
                    events,
                    gap_inf: 0.0,
                    gap_l1: 0.0,
                });
                values.push(info.value);
                pi = policy;
                classes = next_classes;
            }
        }
    };

    let keep_values = mdp.n() <= opts.store_values_up_to;
    for (record, v) in records.iter_mut().zip(values) {
        let diff: Vec<f64> = final_value.iter().zip(v.iter()).map(|(a, b)| a - b).collect();
        record.gap_inf = diff.iter().fold(0.0, |acc, d| acc.max(d.abs()));
        record.gap_l1 = diff.iter().sum();
        if keep_values {
            record.value_before = Some(v);
        }
    }

    let trace = RunTrace {
        variant,
        iterations: records.len(),
        records,
        initial_policy: pi0.clone(),
        initial_classes,
        final_policy: pi,
        final_value,
        final_residual,
        truncated,
        cache_rebuilds,
    };
    if truncated {
        Err(Error::MaxIterExceeded {
            limit: max_iter,
            trace: Box::new(trace),
        })
    } else {
        Ok(trace)
    }
}

/// JSON summary of a trace: `{"variant", "iterations", "switched", "gaps_inf",
/// "gaps_l1", "events", "final_policy"}`. Gaps are taken against `v_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub variant: Variant,
    pub iterations: usize,
    pub switched: Vec<Vec<usize>>,
    pub gaps_inf: Vec<f64>,
    pub gaps_l1: Vec<f64>,
    pub events: Vec<Events>,
    pub final_policy: Vec<usize>,
}

impl TraceSummary {
    pub fn new(trace: &RunTrace, v_star: Option<&ValueFunction>) -> Self {
        let (gaps_inf, gaps_l1) = match (v_star, trace.values()) {
            (Some(vs), Some(values)) => values[..trace.records.len()]
                .iter()
                .map(|v| {
                    let d: Vec<f64> = vs.iter().zip(v.iter()).map(|(a, b)| a - b).collect();
                    (d.iter().fold(0.0, |acc: f64, x| acc.max(x.abs())), d.iter().sum::<f64>())
                })
                .unzip(),
            _ => trace.records.iter().map(|r| (r.gap_inf, r.gap_l1)).unzip(),
        };
        TraceSummary {
            variant: trace.variant,
            iterations: trace.iterations,
            switched: trace
                .records
                .iter()
                .map(|r| r.switched_states.clone())
                .collect(),
            gaps_inf,
            gaps_l1,
            events: trace.records.iter().map(|r| r.events).collect(),
            final_policy: trace.final_policy.0.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{m2, trivial};

    fn switched(step: Step) -> (Policy, Vec<usize>) {
        match step {
            Step::Switched {
                policy, switched, ..
            } => (policy, switched),
            Step::Terminated(_) => panic!("expected a switch"),
        }
    }

    #[test]
    fn howard_step_on_m2() {
        let mdp = m2();
        let (p, s) = switched(howard_step(&mdp, &Policy(vec![0, 0]), Tolerance::default()).unwrap());
        assert_eq!(p, Policy(vec![1, 0]));
        assert_eq!(s, vec![0]);
        assert!(matches!(
            howard_step(&mdp, &Policy(vec![1, 0]), Tolerance::default()).unwrap(),
            Step::Terminated(_)
        ));
    }

    #[test]
    fn simplex_step_on_m2() {
        let mdp = m2();
        let step = simplex_step(&mdp, &Policy(vec![0, 0]), Tolerance::default()).unwrap();
        let Step::Switched { info, .. } = &step else {
            panic!()
        };
        assert!((info.max_advantage - 9.0).abs() < 1e-12);
        assert_eq!(switched(step).1, vec![0]);
    }

    #[test]
    fn simplex_ties_pick_lowest_state() {
        // two identical copies of an improvable state
        let p = vec![
            1.0, 0.0, 0.0, 1.0, // state 0: stay / jump
            0.0, 1.0, 1.0, 0.0, // state 1: stay / jump
        ];
        let mdp = Mdp::new(2, 2, 0.5, p, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let (policy, s) = switched(simplex_step(&mdp, &Policy(vec![0, 0]), Tolerance::default()).unwrap());
        assert_eq!(s, vec![0]);
        assert_eq!(policy, Policy(vec![1, 0]));
    }

    #[test]
    fn single_action_terminates_immediately() {
        let mdp = trivial(0.5);
        for variant in Variant::ALL {
            let t = run(&mdp, &Policy(vec![0]), variant, &RunOptions::default()).unwrap();
            assert_eq!(t.iterations, 0);
        }
    }

    #[test]
    fn m2_runs() {
        let mdp = m2();
        let t = run(&mdp, &Policy(vec![0, 0]), Variant::Howard, &RunOptions::default()).unwrap();
        assert_eq!(t.iterations, 1);
        assert_eq!(t.final_policy, Policy(vec![1, 0]));
        assert!((t.final_value[0] - 9.0).abs() < 1e-12);
        assert!((t.final_value[1] - 10.0).abs() < 1e-12);
        assert!(t.records[0].events.recurrent_class_broken);
        t.check_invariants().unwrap();

        for variant in Variant::ALL {
            let t = run(&mdp, &Policy(vec![1, 0]), variant, &RunOptions::default()).unwrap();
            assert_eq!(t.iterations, 0);
        }
    }

    #[test]
    fn max_iter_carries_partial_trace() {
        let mdp = m2();
        let opts = RunOptions {
            max_iter: Some(0),
            ..RunOptions::default()
        };
        match run(&mdp, &Policy(vec![0, 0]), Variant::Simplex, &opts) {
            Err(Error::MaxIterExceeded { limit: 0, trace }) => {
                assert!(trace.truncated);
                assert_eq!(trace.iterations, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sherman_morrison_is_simplex_only() {
        let opts = RunOptions {
            evaluation: Evaluation::ShermanMorrison,
            ..RunOptions::default()
        };
        assert!(run(&m2(), &Policy(vec![0, 0]), Variant::Howard, &opts).is_err());
        let t = run(&m2(), &Policy(vec![0, 0]), Variant::Simplex, &opts).unwrap();
        assert_eq!(t.final_policy, Policy(vec![1, 0]));
    }

    #[test]
    fn identical_row_switch_keeps_inverse() {
        // both actions of state 0 share the same row
        let p = vec![0.5, 0.5, 0.5, 0.5, 0.2, 0.8, 0.2, 0.8];
        let mdp = Mdp::new(2, 2, 0.9, p, vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        let mut inc = IncrementalEvaluator::new(&mdp, &Policy(vec![0, 0])).unwrap();
        let before = inc.inverse().clone();
        inc.switch_action(&mdp, 0, 1).unwrap();
        assert_eq!(inc.inverse(), &before);
        let v = inc.value();
        let fresh = bellman::policy_evaluation(&mdp, &Policy(vec![1, 0])).unwrap();
        assert!((v[0] - fresh[0]).abs() < 1e-12);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("Howard".parse::<Variant>().unwrap(), Variant::Howard);
        assert!("random".parse::<Variant>().is_err());
    }
}
