//! Finite discounted MDP model: states `0..n`, actions `0..m` in every state,
//! a transition kernel `p[i][a][j]`, expected rewards `r[i][a]` and a discount
//! factor in `(0, 1)`.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of every transition row.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpJson", into = "MdpJson")]
pub struct Mdp {
    n: usize,
    m: usize,
    gamma: f64,
    /// Flattened `[i][a][j]`, row-major.
    transitions: Vec<f64>,
    /// Flattened `[i][a]`.
    rewards: Vec<f64>,
}

/// Wire layout of an MDP: nested arrays, `transitions[i][a][j] = p_ij(a)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpJson {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

impl TryFrom<MdpJson> for Mdp {
    type Error = Error;

    fn try_from(json: MdpJson) -> Result<Self> {
        Mdp::from_nested(json.gamma, json.transitions, json.rewards).and_then(|mdp| {
            if mdp.n != json.n || mdp.m != json.m {
                Err(Error::DimensionMismatch(format!(
                    "header says n={}, m={} but arrays are n={}, m={}",
                    json.n, json.m, mdp.n, mdp.m
                )))
            } else {
                Ok(mdp)
            }
        })
    }
}

impl From<Mdp> for MdpJson {
    fn from(mdp: Mdp) -> Self {
        let transitions = (0..mdp.n)
            .map(|i| (0..mdp.m).map(|a| mdp.row(i, a).to_vec()).collect())
            .collect();
        let rewards = (0..mdp.n)
            .map(|i| (0..mdp.m).map(|a| mdp.reward(i, a)).collect())
            .collect();
        MdpJson {
            n: mdp.n,
            m: mdp.m,
            gamma: mdp.gamma,
            transitions,
            rewards,
        }
    }
}

impl Mdp {
    /// Builds and validates an MDP from flat row-major buffers.
    pub fn new(
        n: usize,
        m: usize,
        gamma: f64,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::DimensionMismatch(format!(
                "n and m must be positive (n={n}, m={m})"
            )));
        }
        if transitions.len() != n * m * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} transition entries, got {}",
                n * m * n,
                transitions.len()
            )));
        }
        if rewards.len() != n * m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} rewards, got {}",
                n * m,
                rewards.len()
            )));
        }
        let mdp = Mdp {
            n,
            m,
            gamma,
            transitions,
            rewards,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds an MDP from `transitions[i][a][j]` and `rewards[i][a]`.
    pub fn from_nested(
        gamma: f64,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = transitions.len();
        let m = transitions.first().map_or(0, Vec::len);
        if rewards.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} transition blocks but {} reward rows",
                n,
                rewards.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * m * n);
        for (i, block) in transitions.into_iter().enumerate() {
            if block.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "state {i} has {} actions, expected {m}",
                    block.len()
                )));
            }
            for (a, row) in block.into_iter().enumerate() {
                if row.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "row ({i}, {a}) has length {}, expected {n}",
                        row.len()
                    )));
                }
                flat.extend(row);
            }
        }
        let mut flat_r = Vec::with_capacity(n * m);
        for (i, row) in rewards.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "reward row {i} has length {}, expected {m}",
                    row.len()
                )));
            }
            flat_r.extend(row);
        }
        Mdp::new(n, m, gamma, flat, flat_r)
    }

    /// Checks the model invariants: stochastic rows, `0 < gamma < 1`, finite rewards.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::GammaOutOfRange(self.gamma));
        }
        for i in 0..self.n {
            for a in 0..self.m {
                let row = self.row(i, a);
                for (j, &p) in row.iter().enumerate() {
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(Error::InvalidProbability {
                            state: i,
                            action: a,
                            next: j,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::RowNotStochastic {
                        state: i,
                        action: a,
                        sum,
                    });
                }
                let r = self.reward(i, a);
                if !r.is_finite() {
                    return Err(Error::NonFiniteReward {
                        state: i,
                        action: a,
                        value: r,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Transition row `p_i·(a)`.
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.m + action) * self.n;
        &self.transitions[start..start + self.n]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.m + action]
    }

    /// One-step lookahead `r(i,a) + gamma * p_i·(a) . v`.
    pub fn q_value(&self, state: usize, action: usize, v: &[f64]) -> f64 {
        let expected: f64 = self.row(state, action).iter().zip(v).map(|(p, x)| p * x).sum();
        self.reward(state, action) + self.gamma * expected
    }

    /// True when every transition row is a unit basis vector.
    pub fn is_deterministic(&self) -> bool {
        self.transitions
            .chunks(self.n)
            .all(|row| row.iter().filter(|&&p| p != 0.0).count() == 1 && row.contains(&1.0))
    }

    /// Number of deterministic stationary policies, saturating at `u128::MAX`.
    pub fn policy_count(&self) -> u128 {
        (self.m as u128)
            .checked_pow(self.n as u32)
            .unwrap_or(u128::MAX)
    }

    /// `max_pi ||r_pi||_inf / (1 - gamma)`, a uniform bound on `||v_pi||_inf`.
    pub fn v_max(&self) -> f64 {
        let r_max = (0..self.n)
            .map(|i| {
                (0..self.m)
                    .map(|a| self.reward(i, a).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        r_max / (1.0 - self.gamma)
    }

    pub fn check_policy(&self, pi: &Policy) -> Result<()> {
        if pi.len() != self.n {
            return Err(Error::InvalidPolicy(format!(
                "policy has {} entries, MDP has {} states",
                pi.len(),
                self.n
            )));
        }
        if let Some((i, &a)) = pi.iter().enumerate().find(|(_, &a)| a >= self.m) {
            return Err(Error::InvalidPolicy(format!(
                "action {a} at state {i} is out of range (m={})",
                self.m
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("MDP serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Deterministic stationary policy, one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    /// Policy that plays action 0 everywhere.
    pub fn zeros(n: usize) -> Self {
        Policy(vec![0; n])
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    /// States where `self` and `other` choose different actions.
    pub fn diff(&self, other: &Policy) -> Vec<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect()
    }
}

impl Deref for Policy {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Policy {
    fn from(actions: Vec<usize>) -> Self {
        Policy(actions)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "a{a}")?;
        }
        write!(f, ")")
    }
}

/// Lexicographic enumeration of all `m^n` policies, last state varying fastest.
#[derive(Debug, Clone)]
pub struct PolicyEnumerator {
    m: usize,
    next: Option<Vec<usize>>,
}

impl PolicyEnumerator {
    pub fn new(n: usize, m: usize) -> Self {
        PolicyEnumerator {
            m,
            next: (m > 0).then(|| vec![0; n]),
        }
    }
}

impl Iterator for PolicyEnumerator {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carry = true;
        for slot in succ.iter_mut().rev() {
            *slot += 1;
            if *slot < self.m {
                carry = false;
                break;
            }
            *slot = 0;
        }
        if !carry {
            self.next = Some(succ);
        }
        Some(Policy(current))
    }
}

macro_rules! real_vector {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn norm_inf(&self) -> f64 {
                self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
            }

            pub fn sum(&self) -> f64 {
                self.0.iter().sum()
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                $name(v)
            }
        }
    };
}

real_vector!(ValueFunction);
real_vector!(Advantage);
