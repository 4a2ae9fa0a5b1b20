//! Checks a traced run against the optimal value: per-iteration contraction
//! factors, closed-form iteration bounds, and the maximal spacing between
//! recurrent-class creations.

use serde::{Deserialize, Serialize};

use crate::bellman::{self, Tolerance};
use crate::bounds::{BoundKind, BoundReport, EventIntervals};
use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy, PolicyEnumerator, ValueFunction};
use crate::solvers::{self, RunOptions, RunTrace, Variant};

/// Enumeration is used below this many policies; Howard's PI above.
pub const ENUMERATION_LIMIT: u128 = 1024;

/// Absolute and ratio slack for contraction checks.
pub const CONTRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Enumeration,
    CertifiedHoward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub value: ValueFunction,
    pub policy: Policy,
    pub method: OracleMethod,
}

/// Optimal value and policy: exhaustive when `m^n <= 1024`, otherwise Howard's
/// PI from the all-zero policy with a Bellman-residual certificate.
pub fn optimal_oracle(mdp: &Mdp) -> Result<Optimum> {
    if mdp.policy_count() <= ENUMERATION_LIMIT {
        enumeration_oracle(mdp)
    } else {
        howard_oracle(mdp)
    }
}

pub fn enumeration_oracle(mdp: &Mdp) -> Result<Optimum> {
    let n = mdp.n();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut evaluated = Vec::new();
    for pi in PolicyEnumerator::new(n, mdp.m()) {
        let v = bellman::policy_evaluation(mdp, &pi)?;
        for (b, x) in best.iter_mut().zip(v.iter()) {
            *b = b.max(*x);
        }
        evaluated.push((pi, v));
    }
    let scale = best.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()));
    let tol = 1e-9 * (1.0 + scale);
    let (policy, _) = evaluated
        .into_iter()
        .find(|(_, v)| v.iter().zip(&best).all(|(x, b)| *x >= b - tol))
        .ok_or_else(|| {
            Error::OracleInconsistent(
                "no single policy attains the componentwise maximum".into(),
            )
        })?;
    Ok(Optimum {
        value: ValueFunction(best),
        policy,
        method: OracleMethod::Enumeration,
    })
}

pub fn howard_oracle(mdp: &Mdp) -> Result<Optimum> {
    let opts = RunOptions {
        track_structure: false,
        max_iter: Some(usize::MAX / 2),
        ..RunOptions::default()
    };
    let trace = solvers::run(mdp, &Policy::zeros(mdp.n()), Variant::Howard, &opts)?;
    let v = trace.final_value;
    let (tv, _) = bellman::apply_t(mdp, &v);
    let residual = tv
        .iter()
        .zip(v.iter())
        .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()));
    if residual > 1e-9 * (1.0 + v.norm_inf()) {
        return Err(Error::OracleInconsistent(format!(
            "Howard fixed point has Bellman residual {residual:e}"
        )));
    }
    Ok(Optimum {
        value: v,
        policy: trace.final_policy,
        method: OracleMethod::CertifiedHoward,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// `||v* - v_k||_inf` contracts by `gamma` under Howard's PI.
    HowardContraction,
    /// `1^T (v* - v_k)` contracts by `1 - (1-gamma)/n` under Simplex-PI.
    SimplexContraction,
    /// Simplex step creating a cycle (deterministic MDP): factor `1 - 1/n`.
    SimplexNewCycle,
    /// Simplex step creating a recurrent class: factor `1 - 1/tau_r`.
    SimplexNewClass,
    /// Howard step creating a recurrent class under Assumption 2: factor `1 - 1/tau_r`.
    HowardNewClass,
    HowardCycleInterval,
    SimplexCycleInterval,
    SimplexClassInterval,
    HowardClassInterval,
}

impl Lemma {
    pub fn name(self) -> &'static str {
        match self {
            Lemma::HowardContraction => "hpicontraction",
            Lemma::SimplexContraction => "spicontraction",
            Lemma::SimplexNewCycle => "spidetpart2",
            Lemma::SimplexNewClass => "spistocpart2",
            Lemma::HowardNewClass => "hpistocpart2",
            Lemma::HowardCycleInterval => "hpidetpart1",
            Lemma::SimplexCycleInterval => "spidetpart1",
            Lemma::SimplexClassInterval => "spistocpart1",
            Lemma::HowardClassInterval => "hpistocpart1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub k: usize,
    pub ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: Lemma,
    pub coefficient: f64,
    pub entries: Vec<RatioEntry>,
    /// `min_k (coefficient - ratio_k)`; `+inf` when no iteration was checked.
    pub worst_slack: f64,
}

impl LemmaCheck {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.passed).count()
    }
}

/// Structural facts the conditional lemmas need.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractionContext {
    pub tau_r: Option<f64>,
    pub assumption2: bool,
}

#[derive(Debug, Clone, Copy)]
enum Norm {
    Inf,
    L1,
}

fn gaps(trace: &RunTrace, v_star: &ValueFunction, norm: Norm) -> Vec<f64> {
    let measure = |v: &ValueFunction| {
        let d = v_star.iter().zip(v.iter()).map(|(a, b)| a - b);
        match norm {
            Norm::Inf => d.fold(0.0, |acc: f64, x| acc.max(x.abs())),
            Norm::L1 => d.sum(),
        }
    };
    match trace.values() {
        Some(values) => values.into_iter().map(measure).collect(),
        None => {
            // stored gaps are relative to the final value
            let offset = measure(&trace.final_value);
            trace
                .records
                .iter()
                .map(|r| match norm {
                    Norm::Inf => r.gap_inf + offset,
                    Norm::L1 => r.gap_l1 + offset,
                })
                .chain(std::iter::once(offset))
                .collect()
        }
    }
}

fn ratio_check(
    lemma: Lemma,
    coefficient: f64,
    gaps: &[f64],
    abs_slack: f64,
    include: impl Fn(usize) -> bool,
) -> LemmaCheck {
    let mut entries = Vec::new();
    let mut worst_slack = f64::INFINITY;
    for k in 0..gaps.len().saturating_sub(1) {
        if !include(k) {
            continue;
        }
        let (before, after) = (gaps[k], gaps[k + 1]);
        let ratio = if before > 0.0 { after / before } else { 0.0 };
        let passed = after <= (coefficient + CONTRACTION_SLACK) * before + abs_slack;
        if before > abs_slack {
            worst_slack = worst_slack.min(coefficient - ratio);
        }
        entries.push(RatioEntry { k, ratio, passed });
    }
    LemmaCheck {
        lemma,
        coefficient,
        entries,
        worst_slack,
    }
}

/// Checks every contraction lemma that applies to the trace.
pub fn check_contraction(
    trace: &RunTrace,
    v_star: &ValueFunction,
    gamma: f64,
    ctx: ContractionContext,
) -> Vec<LemmaCheck> {
    let n = v_star.len() as f64;
    let abs_slack = CONTRACTION_SLACK * (1.0 + v_star.norm_inf());
    let events: Vec<_> = trace.records.iter().map(|r| r.events).collect();
    let l1 = gaps(trace, v_star, Norm::L1);
    let mut out = Vec::new();
    match trace.variant {
        Variant::Howard => {
            let inf = gaps(trace, v_star, Norm::Inf);
            out.push(ratio_check(Lemma::HowardContraction, gamma, &inf, abs_slack, |_| true));
            if let (Some(tau_r), true) = (ctx.tau_r, ctx.assumption2) {
                out.push(ratio_check(
                    Lemma::HowardNewClass,
                    1.0 - 1.0 / tau_r,
                    &l1,
                    abs_slack,
                    |k| events[k].new_recurrent_class,
                ));
            }
        }
        Variant::Simplex => {
            out.push(ratio_check(
                Lemma::SimplexContraction,
                1.0 - (1.0 - gamma) / n,
                &l1,
                abs_slack,
                |_| true,
            ));
            if events.iter().any(|e| e.cycle_created) {
                out.push(ratio_check(
                    Lemma::SimplexNewCycle,
                    1.0 - 1.0 / n,
                    &l1,
                    abs_slack,
                    |k| events[k].cycle_created,
                ));
            }
            if let Some(tau_r) = ctx.tau_r {
                out.push(ratio_check(
                    Lemma::SimplexNewClass,
                    1.0 - 1.0 / tau_r,
                    &l1,
                    abs_slack,
                    |k| events[k].new_recurrent_class,
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckEntry {
    pub name: BoundKind,
    pub value: f64,
    pub iterations: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub entries: Vec<BoundCheckEntry>,
    /// A truncated run only fails a bound it has provably exceeded: after `k`
    /// capped iterations the true count is at least `k + 1`.
    pub truncated: bool,
}

impl BoundCheck {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn violated(&self) -> Vec<BoundKind> {
        self.entries
            .iter()
            .filter(|e| !e.passed)
            .map(|e| e.name)
            .collect()
    }
}

/// `iterations <= floor(bound)` for every applicable bound of the trace's variant.
pub fn check_bounds(trace: &RunTrace, reports: &[BoundReport]) -> BoundCheck {
    let at_least = trace.iterations + usize::from(trace.truncated);
    let entries = reports
        .iter()
        .filter(|r| r.applicable && r.name.applies_to(trace.variant))
        .map(|r| BoundCheckEntry {
            name: r.name,
            value: r.value,
            iterations: trace.iterations,
            passed: at_least as f64 <= r.value.floor(),
        })
        .collect();
    BoundCheck {
        entries,
        truncated: trace.truncated,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCheck {
    pub lemma: Lemma,
    pub limit: f64,
    /// Longest stretch of consecutive iterations without a new recurrent class
    /// (counting the stretch that ends with termination).
    pub longest_quiet_run: usize,
    pub passed: bool,
}

pub fn longest_quiet_run(trace: &RunTrace) -> usize {
    let mut longest = 0;
    let mut current = 0;
    for r in &trace.records {
        if r.events.new_recurrent_class {
            current = 0;
        } else {
            current += 1;
            longest = longest.max(current);
        }
    }
    longest
}

/// Checks the event-spacing lemmas. Class intervals need `tau_t`; cycle
/// intervals apply only to deterministic MDPs. Degenerate (`n = 1`) intervals
/// are skipped.
pub fn check_event_intervals(
    trace: &RunTrace,
    intervals: &EventIntervals,
    deterministic: bool,
    has_tau_t: bool,
) -> Vec<IntervalCheck> {
    if intervals.degenerate || trace.truncated {
        return Vec::new();
    }
    let quiet = longest_quiet_run(trace);
    let mut lemmas = Vec::new();
    match trace.variant {
        Variant::Howard => {
            if deterministic {
                lemmas.push((Lemma::HowardCycleInterval, intervals.det_howard_cycle_interval));
            }
            if has_tau_t {
                lemmas.push((Lemma::HowardClassInterval, intervals.howard_class_interval));
            }
        }
        Variant::Simplex => {
            if deterministic {
                lemmas.push((Lemma::SimplexCycleInterval, intervals.det_simplex_cycle_interval));
            }
            if has_tau_t {
                lemmas.push((Lemma::SimplexClassInterval, intervals.simplex_class_interval));
            }
        }
    }
    lemmas
        .into_iter()
        .map(|(lemma, limit)| IntervalCheck {
            lemma,
            limit,
            longest_quiet_run: quiet,
            passed: quiet as f64 <= limit.floor(),
        })
        .collect()
}

/// One application of the action-elimination argument, logged for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    /// Iteration the argument starts from.
    pub from: usize,
    /// `argmax_s v*(s) - T_{pi_from} v*(s)`, lowest index on ties.
    pub state: usize,
    pub action: usize,
    /// Last iteration index whose policy still plays `action` at `state`.
    pub last_used: usize,
    /// Iterations after `from` until the action is gone for good.
    pub abandoned_after: usize,
}

/// Diagnostics only: for every non-optimal policy of the trace, the state of
/// largest one-step loss under `v*` and when its action is abandoned for good.
pub fn elimination_log(mdp: &Mdp, trace: &RunTrace, v_star: &ValueFunction) -> Vec<Elimination> {
    let policies = trace.policies();
    let scale = Tolerance::default().threshold(v_star.norm_inf());
    let mut out = Vec::new();
    for (from, pi) in policies.iter().enumerate() {
        let t_pi = bellman::apply_t_pi(mdp, pi, v_star);
        let mut state = 0;
        let mut loss = f64::NEG_INFINITY;
        for i in 0..mdp.n() {
            let l = v_star[i] - t_pi[i];
            if l > loss {
                loss = l;
                state = i;
            }
        }
        if loss <= scale {
            continue;
        }
        let action = pi[state];
        let last_used = policies
            .iter()
            .rposition(|p| p[state] == action)
            .unwrap_or(from);
        out.push(Elimination {
            from,
            state,
            action,
            last_used,
            abandoned_after: last_used + 1 - from,
        });
    }
    out
}

/// Scaled residuals of the two policy-difference identities for a pair `(pi, pi2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `||(v' - v) - (I - gamma P')^{-1}(T' v - v)||_inf / (1 + ||v'||_inf)`.
    pub vector: f64,
    /// `|1^T (v' - v) - x'^T (T' v - v)| / (1 + 1^T |v'|)`.
    pub scalar: f64,
}

pub fn identity_residuals(mdp: &Mdp, pi: &Policy, pi2: &Policy) -> Result<IdentityResiduals> {
    let v = bellman::policy_evaluation(mdp, pi)?;
    let v2 = bellman::policy_evaluation(mdp, pi2)?;
    let t2v = bellman::apply_t_pi(mdp, pi2, &v);
    let one_step: Vec<f64> = t2v.iter().zip(v.iter()).map(|(a, b)| a - b).collect();
    let lifted = bellman::resolvent_apply(mdp, pi2, &one_step)?;
    let vector = v2
        .iter()
        .zip(v.iter())
        .zip(&lifted)
        .map(|((a, b), l)| (a - b - l).abs())
        .fold(0.0, f64::max)
        / (1.0 + v2.norm_inf());
    let x2 = crate::structure::visitation(mdp, pi2)?;
    let lhs: f64 = v2.iter().zip(v.iter()).map(|(a, b)| a - b).sum();
    let rhs: f64 = x2.iter().zip(&one_step).map(|(x, d)| x * d).sum();
    let scalar = (lhs - rhs).abs() / (1.0 + v2.iter().map(|x| x.abs()).sum::<f64>());
    Ok(IdentityResiduals { vector, scalar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{all_bounds, bound_event_lemmas};
    use crate::fixtures::{m2, trivial};

    #[test]
    fn m2_oracle() {
        let opt = optimal_oracle(&m2()).unwrap();
        assert_eq!(opt.policy, Policy(vec![1, 0]));
        assert!((opt.value[0] - 9.0).abs() < 1e-12 && (opt.value[1] - 10.0).abs() < 1e-12);
        assert_eq!(opt.method, OracleMethod::Enumeration);

        let h = howard_oracle(&m2()).unwrap();
        assert_eq!(h.policy, opt.policy);
    }

    #[test]
    fn single_action_oracle_is_evaluation() {
        let mdp = Mdp::new(2, 1, 0.8, vec![0.25, 0.75, 0.5, 0.5], vec![1.0, -1.0]).unwrap();
        let opt = optimal_oracle(&mdp).unwrap();
        let v = bellman::policy_evaluation(&mdp, &Policy::zeros(2)).unwrap();
        assert_eq!(opt.value, v);
    }

    #[test]
    fn m2_simplex_contraction() {
        let mdp = m2();
        let t = solvers::run(&mdp, &Policy(vec![0, 0]), Variant::Simplex, &RunOptions::default())
            .unwrap();
        let opt = optimal_oracle(&mdp).unwrap();
        let checks = check_contraction(&t, &opt.value, 0.9, ContractionContext::default());
        let simplex = &checks[0];
        assert_eq!(simplex.lemma, Lemma::SimplexContraction);
        assert!((simplex.coefficient - 0.95).abs() < 1e-15);
        assert_eq!(simplex.entries.len(), 1);
        assert!(simplex.passed());
        assert!(simplex.entries[0].ratio <= 0.95);
    }

    #[test]
    fn optimal_start_is_vacuous() {
        let mdp = m2();
        let t = solvers::run(&mdp, &Policy(vec![1, 0]), Variant::Howard, &RunOptions::default())
            .unwrap();
        let opt = optimal_oracle(&mdp).unwrap();
        let checks = check_contraction(&t, &opt.value, 0.9, ContractionContext::default());
        assert!(checks.iter().all(|c| c.entries.is_empty() && c.passed()));
    }

    #[test]
    fn m2_howard_within_bound() {
        let mdp = m2();
        let t = solvers::run(&mdp, &Policy(vec![0, 0]), Variant::Howard, &RunOptions::default())
            .unwrap();
        let check = check_bounds(&t, &all_bounds(2, 2, 0.9, None));
        assert!(check.passed());
        let howard = check
            .entries
            .iter()
            .find(|e| e.name == BoundKind::HowardGamma)
            .unwrap();
        assert_eq!(howard.value, 48.0);
        assert_eq!(howard.iterations, 1);
    }

    #[test]
    fn zero_bound_single_action() {
        let mdp = trivial(0.9);
        let t = solvers::run(&mdp, &Policy(vec![0]), Variant::Howard, &RunOptions::default())
            .unwrap();
        let check = check_bounds(&t, &all_bounds(1, 1, 0.9, None));
        assert!(check.passed());
        assert!(check
            .entries
            .iter()
            .filter(|e| !e.name.prior_work())
            .all(|e| e.value == 0.0));
    }

    #[test]
    fn truncated_trace_fails_only_exceeded_bounds() {
        let mdp = m2();
        let opts = RunOptions {
            max_iter: Some(0),
            ..RunOptions::default()
        };
        let Err(Error::MaxIterExceeded { mut trace, .. }) =
            solvers::run(&mdp, &Policy(vec![0, 0]), Variant::Howard, &opts)
        else {
            panic!()
        };
        let check = check_bounds(&trace, &all_bounds(2, 2, 0.9, None));
        assert!(check.truncated);
        assert!(check.passed());

        // capped at floor(48) iterations without terminating: at least 49 needed
        trace.iterations = 48;
        let check = check_bounds(&trace, &all_bounds(2, 2, 0.9, None));
        assert_eq!(check.violated(), vec![BoundKind::HowardGamma]);
    }

    #[test]
    fn quiet_runs_and_intervals() {
        let mdp = m2();
        let t = solvers::run(&mdp, &Policy(vec![0, 0]), Variant::Howard, &RunOptions::default())
            .unwrap();
        // (a0,a0) -> (a1,a0) only breaks a class
        assert_eq!(longest_quiet_run(&t), 1);
        let checks = check_event_intervals(&t, &bound_event_lemmas(2, 2, 1.0), true, true);
        assert_eq!(checks.len(), 2);
        assert!(checks.iter().all(|c| c.passed));
    }

    #[test]
    fn elimination_on_m2() {
        let mdp = m2();
        let t = solvers::run(&mdp, &Policy(vec![0, 0]), Variant::Howard, &RunOptions::default())
            .unwrap();
        let opt = optimal_oracle(&mdp).unwrap();
        let log = elimination_log(&mdp, &t, &opt.value);
        assert_eq!(log.len(), 1);
        assert_eq!((log[0].state, log[0].action), (0, 0));
        assert_eq!(log[0].abandoned_after, 1);
    }
}
