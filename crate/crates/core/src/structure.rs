//! Recurrent/transient classification of states under a policy, the discounted
//! visitation vector `x_pi = (I - gamma P_pi^T)^{-1} 1`, and the structural
//! constants `tau_t` / `tau_r` obtained by enumerating every policy.

use std::collections::BTreeSet;

use nalgebra::DVector;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::{Mdp, Policy, PolicyEnumerator};

/// Default cap on the number of enumerated policies.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Slack used when re-checking visitation bounds.
pub const VISITATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Transient,
    Recurrent(usize),
}

impl StateLabel {
    pub fn is_recurrent(self) -> bool {
        matches!(self, StateLabel::Recurrent(_))
    }
}

/// A closed communicating class together with the actions the policy plays on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecurrentClass {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: Vec<StateLabel>,
    /// Sorted by smallest member state; `Recurrent(k)` indexes into this list.
    pub classes: Vec<RecurrentClass>,
}

impl Classification {
    pub fn is_recurrent(&self, state: usize) -> bool {
        self.labels[state].is_recurrent()
    }

    pub fn transient_states(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| !self.is_recurrent(i))
            .collect()
    }

    pub fn recurrent_states(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.is_recurrent(i))
            .collect()
    }
}

/// Recurrent classes are the sink components of the policy graph
/// `i -> j iff p_ij(pi(i)) > 0`.
pub fn classify(mdp: &Mdp, pi: &Policy) -> Classification {
    let n = mdp.n();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for (j, &p) in mdp.row(i, pi[i]).iter().enumerate() {
            if p > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }

    let mut component = vec![usize::MAX; n];
    let sccs = tarjan_scc(&graph);
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }

    let mut classes: Vec<RecurrentClass> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter().all(|node| {
                let i = node.index();
                mdp.row(i, pi[i])
                    .iter()
                    .enumerate()
                    .all(|(j, &p)| p == 0.0 || component[j] == *c)
            })
        })
        .map(|(_, scc)| {
            let mut states: Vec<usize> = scc.iter().map(|node| node.index()).collect();
            states.sort_unstable();
            let actions = states.iter().map(|&i| pi[i]).collect();
            RecurrentClass { states, actions }
        })
        .collect();
    classes.sort();

    let mut labels = vec![StateLabel::Transient; n];
    for (k, class) in classes.iter().enumerate() {
        for &i in &class.states {
            labels[i] = StateLabel::Recurrent(k);
        }
    }
    Classification { labels, classes }
}

/// Discounted state-visitation vector from a uniform start, scaled by `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VisitationVector(pub Vec<f64>);

impl std::ops::Deref for VisitationVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Solves `(I - gamma P_pi^T) x = 1` and checks `1 <= x(i) <= n/(1-gamma)`
/// and `sum x = n/(1-gamma)`.
pub fn visitation(mdp: &Mdp, pi: &Policy) -> Result<VisitationVector> {
    mdp.check_policy(pi)?;
    let n = mdp.n();
    let a = linalg::evaluation_matrix(mdp, pi).transpose();
    let x = linalg::solve(a, &DVector::from_element(n, 1.0))?;
    let x: Vec<f64> = x.iter().copied().collect();

    let total = n as f64 / (1.0 - mdp.gamma());
    let sum: f64 = x.iter().sum();
    if (sum - total).abs() > 1e-8 * total {
        return Err(Error::Internal(format!(
            "visitation mass {sum} differs from n/(1-gamma) = {total}"
        )));
    }
    if let Some((i, &xi)) = x
        .iter()
        .enumerate()
        .find(|(_, &xi)| xi < 1.0 - VISITATION_SLACK || xi > total * (1.0 + 1e-12) + VISITATION_SLACK)
    {
        return Err(Error::Internal(format!(
            "visitation x({i}) = {xi} outside [1, {total}]"
        )));
    }
    Ok(VisitationVector(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub policy: Policy,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    #[serde(rename = "T")]
    pub transient: Vec<usize>,
    #[serde(rename = "R")]
    pub recurrent: Vec<usize>,
}

/// A state whose label differs between two policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConflict {
    pub state: usize,
    pub recurrent_under: Policy,
    pub transient_under: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub tau_t: f64,
    pub tau_r: f64,
    pub gamma: f64,
    pub policies_enumerated: u128,
    #[serde(rename = "assumption2")]
    pub assumption2_holds: bool,
    pub partition: Option<Partition>,
    pub assumption2_witness: Option<LabelConflict>,
    /// `None` when no policy has a transient state (then `tau_t = 1`).
    pub witness_tau_t: Option<Witness>,
    pub witness_tau_r: Option<Witness>,
}

fn check_budget(mdp: &Mdp, budget: u128) -> Result<u128> {
    let policies = mdp.policy_count();
    if policies > budget {
        Err(Error::BudgetExceeded { policies, budget })
    } else {
        Ok(policies)
    }
}

/// Tracks per-state labels seen across policies.
struct LabelTracker {
    recurrent_seen: Vec<Option<Policy>>,
    transient_seen: Vec<Option<Policy>>,
}

impl LabelTracker {
    fn new(n: usize) -> Self {
        LabelTracker {
            recurrent_seen: vec![None; n],
            transient_seen: vec![None; n],
        }
    }

    fn record(&mut self, pi: &Policy, cls: &Classification) {
        for (i, label) in cls.labels.iter().enumerate() {
            let slot = if label.is_recurrent() {
                &mut self.recurrent_seen[i]
            } else {
                &mut self.transient_seen[i]
            };
            if slot.is_none() {
                *slot = Some(pi.clone());
            }
        }
    }

    fn verdict(self) -> std::result::Result<Partition, LabelConflict> {
        let mut transient = Vec::new();
        let mut recurrent = Vec::new();
        for (i, (r, t)) in self
            .recurrent_seen
            .into_iter()
            .zip(self.transient_seen)
            .enumerate()
        {
            match (r, t) {
                (Some(r), Some(t)) => {
                    return Err(LabelConflict {
                        state: i,
                        recurrent_under: r,
                        transient_under: t,
                    })
                }
                (Some(_), None) => recurrent.push(i),
                _ => transient.push(i),
            }
        }
        Ok(Partition {
            transient,
            recurrent,
        })
    }
}

/// Enumerates all policies and returns the smallest `tau_t, tau_r >= 1` with
/// `x_pi(i) <= tau_t` on transient states and `x_pi(i) >= n/((1-gamma) tau_r)`
/// on recurrent states, plus the Assumption 2 verdict.
pub fn structural_constants(mdp: &Mdp, budget: u128) -> Result<StructuralReport> {
    let policies = check_budget(mdp, budget)?;
    let n = mdp.n();
    let scale = n as f64 / (1.0 - mdp.gamma());

    let mut tau_t = 1.0;
    let mut tau_r = 1.0;
    let mut witness_tau_t = None;
    let mut witness_tau_r = None;
    let mut labels = LabelTracker::new(n);

    for pi in PolicyEnumerator::new(n, mdp.m()) {
        let cls = classify(mdp, &pi);
        let x = visitation(mdp, &pi)?;
        for i in 0..n {
            if cls.is_recurrent(i) {
                let t = scale / x[i];
                if t > tau_r {
                    tau_r = t;
                    witness_tau_r = Some(Witness {
                        policy: pi.clone(),
                        state: i,
                    });
                }
            } else if x[i] > tau_t {
                tau_t = x[i];
                witness_tau_t = Some(Witness {
                    policy: pi.clone(),
                    state: i,
                });
            }
        }
        labels.record(&pi, &cls);
    }

    let (partition, assumption2_witness) = match labels.verdict() {
        Ok(p) => (Some(p), None),
        Err(w) => (None, Some(w)),
    };
    Ok(StructuralReport {
        tau_t,
        tau_r,
        gamma: mdp.gamma(),
        policies_enumerated: policies,
        assumption2_holds: partition.is_some(),
        partition,
        assumption2_witness,
        witness_tau_t,
        witness_tau_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption1Bound {
    TransientLower,
    TransientUpper,
    RecurrentLower,
    RecurrentUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Violation {
    pub policy: Policy,
    pub state: usize,
    pub x: f64,
    pub bound: Assumption1Bound,
}

/// Re-verifies the Assumption 1 inequalities for every policy against the
/// constants in `report`. Returns the first violation in enumeration order.
pub fn check_assumption1(
    mdp: &Mdp,
    report: &StructuralReport,
) -> Result<Option<Assumption1Violation>> {
    let n = mdp.n();
    let scale = n as f64 / (1.0 - mdp.gamma());
    let lower_r = scale / report.tau_r - VISITATION_SLACK;
    let upper_r = scale + VISITATION_SLACK;
    for pi in PolicyEnumerator::new(n, mdp.m()) {
        let cls = classify(mdp, &pi);
        let x = visitation(mdp, &pi)?;
        for i in 0..n {
            let bound = if cls.is_recurrent(i) {
                if x[i] < lower_r {
                    Some(Assumption1Bound::RecurrentLower)
                } else if x[i] > upper_r {
                    Some(Assumption1Bound::RecurrentUpper)
                } else {
                    None
                }
            } else if x[i] < 1.0 - VISITATION_SLACK {
                Some(Assumption1Bound::TransientLower)
            } else if x[i] > report.tau_t + VISITATION_SLACK {
                Some(Assumption1Bound::TransientUpper)
            } else {
                None
            };
            if let Some(bound) = bound {
                return Ok(Some(Assumption1Violation {
                    policy: pi,
                    state: i,
                    x: x[i],
                    bound,
                }));
            }
        }
    }
    Ok(None)
}

/// Checks whether every state keeps the same transient/recurrent label under
/// all policies.
pub fn check_assumption2(
    mdp: &Mdp,
    budget: u128,
) -> Result<std::result::Result<Partition, LabelConflict>> {
    check_budget(mdp, budget)?;
    let mut labels = LabelTracker::new(mdp.n());
    for pi in PolicyEnumerator::new(mdp.n(), mdp.m()) {
        labels.record(&pi, &classify(mdp, &pi));
    }
    Ok(labels.verdict())
}

/// Changes in recurrent classes between consecutive policies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Events {
    pub new_recurrent_class: bool,
    pub recurrent_class_broken: bool,
    /// Same as `new_recurrent_class`, only set on deterministic MDPs.
    pub cycle_created: bool,
}

impl Events {
    pub fn any(self) -> bool {
        self.new_recurrent_class || self.recurrent_class_broken
    }
}

/// A class is identified by its state set together with the actions played on it.
pub fn diff_classes(before: &Classification, after: &Classification, deterministic: bool) -> Events {
    let old: BTreeSet<&RecurrentClass> = before.classes.iter().collect();
    let new: BTreeSet<&RecurrentClass> = after.classes.iter().collect();
    let new_recurrent_class = new.iter().any(|c| !old.contains(c));
    Events {
        new_recurrent_class,
        recurrent_class_broken: old.iter().any(|c| !new.contains(c)),
        cycle_created: deterministic && new_recurrent_class,
    }
}

pub fn detect_events(mdp: &Mdp, before: &Policy, after: &Policy) -> Events {
    diff_classes(
        &classify(mdp, before),
        &classify(mdp, after),
        mdp.is_deterministic(),
    )
}
