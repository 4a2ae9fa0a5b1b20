//! Reproducible MDP instance families.
//!
//! Every instance is a pure function of its [`GenSpec`]. The generator is
//! ChaCha8 seeded through `SeedableRng::seed_from_u64`; draws happen
//! state-major, then action-major, and within each `(i, a)` pair the
//! transition row is drawn before the reward. Uniform reals are
//! 53-bit floats in `[0, 1)`; Dirichlet(1) weights are normalized `-ln(1 - u)`.
//! Absent transitions are stored as exact zeros.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, MdpJson};

/// Minimum probability mass each transient-block action sends to the
/// recurrent block in the two-block family.
pub const DRAIN_MASS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Family {
    DenseRandom,
    Deterministic,
    Garnet { branching: usize },
    /// States `0..transient` drain into the closed block `transient..n`.
    #[serde(alias = "two_block")]
    TwoBlockAssumption2 { transient: usize, recurrent: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::DenseRandom => "dense_random",
            Family::Deterministic => "deterministic",
            Family::Garnet { .. } => "garnet",
            Family::TwoBlockAssumption2 { .. } => "two_block",
        }
    }
}

fn default_reward_range() -> (f64, f64) {
    (0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default = "default_reward_range")]
    pub reward_range: (f64, f64),
}

impl GenSpec {
    pub fn new(family: Family, n: usize, m: usize, gamma: f64, seed: u64) -> Self {
        GenSpec {
            family,
            n,
            m,
            gamma,
            seed,
            reward_range: default_reward_range(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n == 0 || self.m == 0 {
            return bad(format!("n and m must be >= 1 (n={}, m={})", self.n, self.m));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} outside (0, 1)", self.gamma));
        }
        let (lo, hi) = self.reward_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("reward range [{lo}, {hi}] is invalid"));
        }
        match self.family {
            Family::Garnet { branching } if branching == 0 || branching > self.n => {
                bad(format!("branching {branching} outside [1, n={}]", self.n))
            }
            Family::TwoBlockAssumption2 {
                transient,
                recurrent,
            } if recurrent == 0 || transient + recurrent != self.n => bad(format!(
                "two-block sizes t={transient}, r={recurrent} must satisfy t + r = n = {} and r >= 1",
                self.n
            )),
            _ => Ok(()),
        }
    }

    /// Short human-readable digest.
    pub fn digest(&self) -> String {
        let extra = match self.family {
            Family::Garnet { branching } => format!(" b={branching}"),
            Family::TwoBlockAssumption2 {
                transient,
                recurrent,
            } => format!(" t={transient} r={recurrent}"),
            _ => String::new(),
        };
        format!(
            "family={}{} n={} m={} gamma={} seed={}",
            self.family.name(),
            extra,
            self.n,
            self.m,
            self.gamma,
            self.seed
        )
    }
}

struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    fn reward(&mut self, (lo, hi): (f64, f64)) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Dirichlet(1) weights over `support`, written into `row`.
    fn dirichlet_into(&mut self, row: &mut [f64], support: &[usize], mass: f64) {
        let draws: Vec<f64> = support.iter().map(|_| -(1.0 - self.uniform()).ln()).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            for (&j, w) in support.iter().zip(&draws) {
                row[j] += mass * w / total;
            }
        } else {
            row[support[0]] += mass;
        }
    }

    /// `k` distinct indices from `0..n` by partial Fisher-Yates.
    fn distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        let mut out = pool[..k].to_vec();
        out.sort_unstable();
        out
    }
}

/// Rescales a row so its entries sum to one as closely as floating point allows.
fn normalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    for p in row.iter_mut() {
        *p /= total;
    }
}

pub fn generate(spec: &GenSpec) -> Result<Mdp> {
    spec.validate()?;
    let n = spec.n;
    let m = spec.m;
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let mut transitions = Vec::with_capacity(n * m * n);
    let mut rewards = Vec::with_capacity(n * m);
    let all: Vec<usize> = (0..n).collect();

    for i in 0..n {
        for _a in 0..m {
            let mut row = vec![0.0; n];
            match spec.family {
                Family::DenseRandom => s.dirichlet_into(&mut row, &all, 1.0),
                Family::Deterministic => row[s.index(n)] = 1.0,
                Family::Garnet { branching } => {
                    let support = s.distinct(n, branching);
                    s.dirichlet_into(&mut row, &support, 1.0);
                }
                Family::TwoBlockAssumption2 { transient, .. } => {
                    let closed: Vec<usize> = (transient..n).collect();
                    if i < transient {
                        // strictly forward inside the transient block, plus the drain
                        let support: Vec<usize> = (i + 1..n).collect();
                        s.dirichlet_into(&mut row, &support, 1.0 - DRAIN_MASS);
                        s.dirichlet_into(&mut row, &closed, DRAIN_MASS);
                    } else {
                        // half the mass follows the cyclic backbone of the closed block
                        let next = transient + (i - transient + 1) % closed.len();
                        row[next] += 0.5;
                        s.dirichlet_into(&mut row, &closed, 0.5);
                    }
                }
            }
            if !matches!(spec.family, Family::Deterministic) {
                normalize(&mut row);
            }
            transitions.extend(row);
            rewards.push(s.reward(spec.reward_range));
        }
    }
    Mdp::new(n, m, spec.gamma, transitions, rewards)
}

/// Reads an MDP from JSON, distinguishing malformed input from invalid models.
pub fn load(path: impl AsRef<Path>) -> Result<Mdp> {
    let text = fs::read_to_string(path)?;
    let json: MdpJson = serde_json::from_str(&text)?;
    Mdp::try_from(json)
}

pub fn save(mdp: &Mdp, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string(mdp)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
