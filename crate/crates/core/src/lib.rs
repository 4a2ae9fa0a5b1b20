//! Exact policy iteration for finite discounted MDPs, together with the
//! machinery to check runs against known iteration bounds and contraction
//! properties.
//!
//! The main entry points are [`solvers::run`] (Howard's PI or Simplex-PI with a
//! full trace), [`structure::structural_constants`] (the `tau_t` / `tau_r`
//! constants by policy enumeration), the closed-form bounds in [`bounds`], and
//! the trace checks in [`verify`].

pub mod bellman;
pub mod bounds;
pub mod error;
pub mod fixtures;
pub mod generators;
pub mod linalg;
pub mod mdp;
pub mod solvers;
pub mod structure;
pub mod verify;

pub use bellman::Tolerance;
pub use error::{Error, Result};
pub use generators::{Family, GenSpec};
pub use mdp::{Advantage, Mdp, Policy, PolicyEnumerator, ValueFunction};
pub use solvers::{RunOptions, RunTrace, Variant};
