//! Dense linear algebra for policy evaluation: building `I - gamma P_pi`,
//! direct LU solves, and the rank-one inverse update used when a single
//! transition row changes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};

/// `P_pi`, the `n x n` transition matrix of a policy.
pub fn policy_matrix(mdp: &Mdp, pi: &Policy) -> DMatrix<f64> {
    let n = mdp.n();
    DMatrix::from_fn(n, n, |i, j| mdp.row(i, pi[i])[j])
}

/// `r_pi`, the expected reward vector of a policy.
pub fn policy_rewards(mdp: &Mdp, pi: &Policy) -> DVector<f64> {
    DVector::from_fn(mdp.n(), |i, _| mdp.reward(i, pi[i]))
}

/// `I - gamma P_pi`.
pub fn evaluation_matrix(mdp: &Mdp, pi: &Policy) -> DMatrix<f64> {
    let n = mdp.n();
    let g = mdp.gamma();
    DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - g * mdp.row(i, pi[i])[j]
    })
}

/// Solves `a x = b` with partial-pivot LU.
pub fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a.lu().solve(b).ok_or(Error::SingularSystem)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem)
    }
}

pub fn invert(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = a.try_inverse().ok_or(Error::SingularSystem)?;
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::SingularSystem)
    }
}

/// Updates `inv = A^{-1}` in place to `(A + u v^T)^{-1}` for `u = scale * e_row`.
///
/// Costs `O(n^2)`. Returns the Sherman-Morrison denominator `1 + v^T A^{-1} u`;
/// fails when it vanishes.
pub fn rank_one_row_update(
    inv: &mut DMatrix<f64>,
    row: usize,
    scale: f64,
    v: &DVector<f64>,
) -> Result<f64> {
    // A^{-1} u = scale * column `row` of A^{-1}
    let inv_u: DVector<f64> = inv.column(row) * scale;
    // v^T A^{-1}
    let vt_inv = v.transpose() * &*inv;
    let denom = 1.0 + (vt_inv.column(row)[0]) * scale;
    if denom.abs() < f64::EPSILON || !denom.is_finite() {
        return Err(Error::SingularSystem);
    }
    inv.ger(-1.0 / denom, &inv_u, &vt_inv.transpose(), 1.0);
    Ok(denom)
}

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_update_matches_fresh_inverse() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 0.2, 3.0, 0.1, 0.0, 0.7, 2.5]);
        let mut inv = invert(a.clone()).unwrap();
        let v = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let scale = -0.8;
        rank_one_row_update(&mut inv, 1, scale, &v).unwrap();

        let mut updated = a.clone();
        for j in 0..3 {
            updated[(1, j)] += scale * v[j];
        }
        let fresh = invert(updated).unwrap();
        assert!((inv - fresh).amax() < 1e-12);
    }

    #[test]
    fn zero_difference_leaves_inverse_unchanged() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.45, -0.3, 1.0]);
        let inv0 = invert(a).unwrap();
        let mut inv = inv0.clone();
        rank_one_row_update(&mut inv, 0, -0.9, &DVector::zeros(2)).unwrap();
        assert_eq!(inv, inv0);
    }

    #[test]
    fn singular_system_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(solve(a, &b), Err(Error::SingularSystem)));
    }
}
