//! Small hand-checkable instances shared by tests, the CLI and the demo.

use crate::mdp::Mdp;

/// Two states, two actions, `gamma = 0.9`.
///
/// State 0: `a0` self-loop (reward 0), `a1` moves to state 1 (reward 0).
/// State 1: `a0` self-loop (reward 1), `a1` moves to state 0 (reward 0).
/// The optimal policy is `(a1, a0)` with value `(9, 10)`.
pub fn m2() -> Mdp {
    Mdp::from_nested(
        0.9,
        vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        ],
        vec![vec![0.0, 0.0], vec![1.0, 0.0]],
    )
    .expect("m2 is a valid MDP")
}

/// One state with a single self-looping action.
pub fn trivial(gamma: f64) -> Mdp {
    Mdp::new(1, 1, gamma, vec![1.0], vec![0.0]).expect("valid trivial MDP")
}
