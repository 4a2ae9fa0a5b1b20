//! Closed-form iteration bounds for Howard's PI and Simplex-PI.
//!
//! All logarithms are natural. Every function returns a real number of
//! iterations; callers compare integral iteration counts against `floor(value)`.

use serde::{Deserialize, Serialize};

use crate::solvers::Variant;

fn ceil_ln_term(scale: f64, arg: f64) -> f64 {
    (scale * arg.ln()).ceil()
}

/// `n (m-1) ceil( 1/(1-gamma) * ln(1/(1-gamma)) )`.
pub fn bound_howard_gamma(n: usize, m: usize, gamma: f64) -> f64 {
    let h = 1.0 / (1.0 - gamma);
    (n * (m - 1)) as f64 * ceil_ln_term(h, h)
}

/// `n (m-1) ceil( n/(1-gamma) * ln(n/(1-gamma)) )`.
pub fn bound_simplex_gamma(n: usize, m: usize, gamma: f64) -> f64 {
    let h = n as f64 / (1.0 - gamma);
    (n * (m - 1)) as f64 * ceil_ln_term(h, h)
}

/// `n^2 (m-1) (1 + 2/(1-gamma) * ln(1/(1-gamma)))`.
pub fn bound_simplex_gamma2(n: usize, m: usize, gamma: f64) -> f64 {
    let h = 1.0 / (1.0 - gamma);
    (n * n * (m - 1)) as f64 * (1.0 + 2.0 * h * h.ln())
}

/// Earlier bound for both variants: `n (m-1) ceil( n/(1-gamma) ln(n^2/(1-gamma)) )`.
pub fn bound_ye_reference(n: usize, m: usize, gamma: f64) -> f64 {
    let nf = n as f64;
    let h = 1.0 / (1.0 - gamma);
    (n * (m - 1)) as f64 * ceil_ln_term(nf * h, nf * nf * h)
}

/// Earlier Howard bound: `(nm + 1) ceil( 1/(1-gamma) ln(n/(1-gamma)) )`.
pub fn bound_hansen_reference(n: usize, m: usize, gamma: f64) -> f64 {
    let h = 1.0 / (1.0 - gamma);
    (n * m + 1) as f64 * ceil_ln_term(h, n as f64 * h)
}

/// Iterations sufficient for an `eps`-optimal policy in max-norm.
///
/// Howard: `ceil( ln(Vmax/eps) / (1-gamma) )`;
/// Simplex: `ceil( n ln(n Vmax/eps) / (1-gamma) )`.
pub fn bound_eps(n: usize, gamma: f64, v_max: f64, eps: f64, variant: Variant) -> f64 {
    let h = 1.0 / (1.0 - gamma);
    let raw = match variant {
        Variant::Howard => h * (v_max / eps).ln(),
        Variant::Simplex => n as f64 * h * (n as f64 * v_max / eps).ln(),
    };
    raw.ceil().max(0.0)
}

/// Simplex-PI bound under Assumption 1, evaluated verbatim:
/// `n^2 (m-1) (ceil(tr ln(n tr)) + ceil(tr ln(n tt))) [ (m-1) ceil(n tt ln(n tt)) + ceil(n tt ln(n^2 tt)) ]`.
pub fn bound_simplex_structural(n: usize, m: usize, tau_t: f64, tau_r: f64) -> f64 {
    let nf = n as f64;
    let creations = ceil_ln_term(tau_r, nf * tau_r) + ceil_ln_term(tau_r, nf * tau_t);
    (n * n * (m - 1)) as f64 * creations * simplex_class_interval(n, m, tau_t) / nf
}

/// Bound for both variants under Assumptions 1 and 2:
/// `n (m-1) (ceil(tt ln(n tt)) + ceil(tr ln(n tr)))`.
pub fn bound_structural_both(n: usize, m: usize, tau_t: f64, tau_r: f64) -> f64 {
    let nf = n as f64;
    (n * (m - 1)) as f64 * (ceil_ln_term(tau_t, nf * tau_t) + ceil_ln_term(tau_r, nf * tau_r))
}

/// `n [ (m-1) ceil(n tt ln(n tt)) + ceil(n tt ln(n^2 tt)) ]`.
fn simplex_class_interval(n: usize, m: usize, tau_t: f64) -> f64 {
    let nf = n as f64;
    nf * ((m - 1) as f64 * ceil_ln_term(nf * tau_t, nf * tau_t)
        + ceil_ln_term(nf * tau_t, nf * nf * tau_t))
}

/// Maximum number of consecutive iterations without a new recurrent class
/// (or cycle) before the run must finish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventIntervals {
    pub simplex_class_interval: f64,
    pub howard_class_interval: f64,
    pub det_simplex_cycle_interval: f64,
    pub det_howard_cycle_interval: f64,
    /// Set when `n = 1`, where the logarithmic terms collapse to zero.
    pub degenerate: bool,
}

pub fn bound_event_lemmas(n: usize, m: usize, tau_t: f64) -> EventIntervals {
    let nf = n as f64;
    EventIntervals {
        simplex_class_interval: simplex_class_interval(n, m, tau_t),
        howard_class_interval: (n * m) as f64 * ceil_ln_term(tau_t, nf * tau_t),
        det_simplex_cycle_interval: (n * m) as f64 * ceil_ln_term(2.0 * (nf - 1.0), nf),
        det_howard_cycle_interval: nf,
        degenerate: n == 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    HowardGamma,
    SimplexGamma,
    SimplexGamma2,
    SimplexStructural,
    StructuralBoth,
    /// Prior-work reference bound for both variants.
    YeReference,
    /// Prior-work reference bound for Howard's PI.
    HansenReference,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::HowardGamma => "howard_gamma",
            BoundKind::SimplexGamma => "simplex_gamma",
            BoundKind::SimplexGamma2 => "simplex_gamma2",
            BoundKind::SimplexStructural => "simplex_structural",
            BoundKind::StructuralBoth => "structural_both",
            BoundKind::YeReference => "ye_reference",
            BoundKind::HansenReference => "hansen_reference",
        }
    }

    pub fn applies_to(self, variant: Variant) -> bool {
        match self {
            BoundKind::HowardGamma | BoundKind::HansenReference => variant == Variant::Howard,
            BoundKind::SimplexGamma | BoundKind::SimplexGamma2 | BoundKind::SimplexStructural => {
                variant == Variant::Simplex
            }
            BoundKind::StructuralBoth | BoundKind::YeReference => true,
        }
    }

    pub fn prior_work(self) -> bool {
        matches!(self, BoundKind::YeReference | BoundKind::HansenReference)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: BoundKind,
    pub value: f64,
    pub inputs: BoundInputs,
    /// False when a prerequisite fails or the formula is degenerate.
    pub applicable: bool,
}

/// Structural inputs for the gamma-independent bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralInputs {
    pub tau_t: f64,
    pub tau_r: f64,
    pub assumption2: bool,
}

/// Evaluates every bound that can be computed for this `(n, m, gamma)` and
/// optional structural constants.
pub fn all_bounds(
    n: usize,
    m: usize,
    gamma: f64,
    structural: Option<StructuralInputs>,
) -> Vec<BoundReport> {
    let base = BoundInputs {
        n,
        m,
        gamma,
        tau_t: None,
        tau_r: None,
    };
    let mut out: Vec<BoundReport> = [
        (BoundKind::HowardGamma, bound_howard_gamma(n, m, gamma)),
        (BoundKind::SimplexGamma, bound_simplex_gamma(n, m, gamma)),
        (BoundKind::SimplexGamma2, bound_simplex_gamma2(n, m, gamma)),
        (BoundKind::YeReference, bound_ye_reference(n, m, gamma)),
        (BoundKind::HansenReference, bound_hansen_reference(n, m, gamma)),
    ]
    .into_iter()
    .map(|(name, value)| BoundReport {
        name,
        value,
        inputs: base,
        applicable: true,
    })
    .collect();

    if let Some(s) = structural {
        let inputs = BoundInputs {
            tau_t: Some(s.tau_t),
            tau_r: Some(s.tau_r),
            ..base
        };
        // log(n tau) vanishes at n = 1 and the formulas collapse to 0.
        let degenerate = n == 1;
        out.push(BoundReport {
            name: BoundKind::SimplexStructural,
            value: bound_simplex_structural(n, m, s.tau_t, s.tau_r),
            inputs,
            applicable: !degenerate,
        });
        out.push(BoundReport {
            name: BoundKind::StructuralBoth,
            value: bound_structural_both(n, m, s.tau_t, s.tau_r),
            inputs,
            applicable: s.assumption2 && !degenerate,
        });
    }
    out
}

/// Tightest gamma-dependent bound for a variant.
pub fn tightest_gamma_bound(n: usize, m: usize, gamma: f64, variant: Variant) -> f64 {
    match variant {
        Variant::Howard => bound_howard_gamma(n, m, gamma),
        Variant::Simplex => bound_simplex_gamma(n, m, gamma).min(bound_simplex_gamma2(n, m, gamma)),
    }
}

/// Default iteration cap: tightest applicable bound plus one.
pub fn default_max_iter(n: usize, m: usize, gamma: f64, variant: Variant) -> usize {
    let b = tightest_gamma_bound(n, m, gamma, variant).floor();
    if b.is_finite() && b < (usize::MAX / 2) as f64 {
        b as usize + 1
    } else {
        usize::MAX / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn howard_gamma_examples() {
        assert_eq!(bound_howard_gamma(2, 2, 0.9), 48.0);
        assert_eq!(bound_howard_gamma(5, 1, 0.9), 0.0);
        // 2 ln 2 = 1.386 -> ceil 2
        assert_eq!(bound_howard_gamma(3, 4, 0.5), 3.0 * 3.0 * 2.0);
    }

    #[test]
    fn simplex_gamma_examples() {
        assert_eq!(bound_simplex_gamma(2, 2, 0.9), 120.0);
        assert_eq!(bound_simplex_gamma(4, 1, 0.9), 0.0);
        for g in [0.3, 0.9, 0.999] {
            assert_eq!(bound_simplex_gamma(1, 3, g), bound_howard_gamma(1, 3, g));
        }
    }

    #[test]
    fn simplex_gamma2_examples() {
        let expected = 4.0 * (1.0 + 20.0 * 10f64.ln());
        assert!((bound_simplex_gamma2(2, 2, 0.9) - expected).abs() < 1e-9);
        assert!((bound_simplex_gamma2(2, 2, 0.9) - 188.2).abs() < 0.01);
        assert_eq!(bound_simplex_gamma2(3, 1, 0.9), 0.0);
        assert!((bound_simplex_gamma2(2, 2, 0.5) - 15.09).abs() < 0.01);
    }

    #[test]
    fn eps_examples() {
        assert_eq!(bound_eps(3, 0.9, 10.0, 10.0, Variant::Howard), 0.0);
        assert_eq!(bound_eps(4, 0.9, 10.0, 1e-3, Variant::Howard), 93.0);
        assert_eq!(
            bound_eps(1, 0.95, 3.0, 1e-4, Variant::Simplex),
            bound_eps(1, 0.95, 3.0, 1e-4, Variant::Howard)
        );
    }

    #[test]
    fn structural_examples() {
        assert_eq!(bound_simplex_structural(2, 2, 1.0, 2.0), 100.0);
        assert_eq!(bound_simplex_structural(3, 1, 1.5, 2.0), 0.0);
        assert_eq!(bound_structural_both(2, 2, 1.0, 2.0), 8.0);
        assert_eq!(bound_structural_both(2, 1, 1.0, 2.0), 0.0);
        assert_eq!(bound_structural_both(1, 3, 1.0, 1.0), 0.0);
    }

    #[test]
    fn event_interval_examples() {
        let e = bound_event_lemmas(2, 2, 1.0);
        assert_eq!(e.simplex_class_interval, 10.0);
        assert_eq!(e.det_howard_cycle_interval, 2.0);
        // nm ceil(tau_t ln(n tau_t)) = 4 ceil(ln 2) = 4
        assert_eq!(e.howard_class_interval, 4.0);
        // nm ceil(2 ln 2) = 4 * 2
        assert_eq!(e.det_simplex_cycle_interval, 8.0);
        assert!(!e.degenerate);

        let e = bound_event_lemmas(1, 3, 1.0);
        assert!(e.degenerate);
        assert_eq!(e.det_simplex_cycle_interval, 0.0);
        assert!(e.simplex_class_interval.is_finite());
    }

    #[test]
    fn deterministic_structural_bound_is_polynomial() {
        // with tau_t = tau_r = n the bound is O(n^5 m^2 log^2 n)
        for n in 2..=12usize {
            for m in 2..=6usize {
                let nf = n as f64;
                let b = bound_simplex_structural(n, m, nf, nf);
                let shape = nf.powi(5) * (m * m) as f64 * nf.ln().powi(2);
                assert!(b <= 40.0 * shape, "n={n} m={m} b={b} shape={shape}");
            }
        }
    }

    #[test]
    fn reference_bounds() {
        // n(m-1) ceil(20 ln 40) = 2 * 74
        assert_eq!(bound_ye_reference(2, 2, 0.9), 148.0);
        // 5 * ceil(10 ln 20) = 5 * 30
        assert_eq!(bound_hansen_reference(2, 2, 0.9), 150.0);
    }

    #[test]
    fn default_cap_is_bound_plus_one() {
        assert_eq!(default_max_iter(2, 2, 0.9, Variant::Howard), 49);
        assert_eq!(default_max_iter(2, 2, 0.9, Variant::Simplex), 121);
        assert_eq!(default_max_iter(3, 1, 0.9, Variant::Simplex), 1);
    }
}
