//! WebAssembly bindings for the browser demo. Every exported function returns
//! a JSON string; the `*_json` functions hold the logic and are callable natively.

use pi_bounds::bounds::{self, BoundKind};
use pi_bounds::generators::generate;
use pi_bounds::solvers::{self, TraceSummary};
use pi_bounds::structure::{self, StateLabel};
use pi_bounds::verify;
use pi_bounds::{Error, Family, GenSpec, Mdp, Policy, RunOptions, Variant};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Structural constants are only computed up to this many policies in the browser.
pub const DEMO_BUDGET: u128 = 50_000;

/// Largest model the demo will generate.
pub const MAX_STATES: usize = 60;

fn family(name: &str, n: usize) -> Result<Family, String> {
    Ok(match name {
        "dense_random" => Family::DenseRandom,
        "deterministic" => Family::Deterministic,
        "garnet" => Family::Garnet {
            branching: n.div_ceil(2).max(1),
        },
        "two_block" => Family::TwoBlockAssumption2 {
            transient: n / 2,
            recurrent: n - n / 2,
        },
        other => return Err(format!("unknown family {other:?}")),
    })
}

fn instance(family_name: &str, n: usize, m: usize, gamma: f64, seed: u64) -> Result<Mdp, String> {
    if n > MAX_STATES {
        return Err(format!("the demo is limited to {MAX_STATES} states"));
    }
    let spec = GenSpec::new(family(family_name, n)?, n, m, gamma, seed);
    generate(&spec).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct RunOutput {
    digest: String,
    optimal_value: Vec<f64>,
    optimal_policy: Vec<usize>,
    runs: Vec<TraceSummary>,
    bounds: Vec<(String, f64)>,
}

/// Runs both variants from the all-zero policy and returns their gap curves
/// against the optimal value.
pub fn run_pi_json(family_name: &str, n: usize, m: usize, gamma: f64, seed: u64) -> Result<String, String> {
    let mdp = instance(family_name, n, m, gamma, seed)?;
    let spec_digest = format!("{family_name} n={n} m={m} gamma={gamma} seed={seed}");
    let optimum = verify::optimal_oracle(&mdp).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for variant in Variant::ALL {
        let trace = match solvers::run(&mdp, &Policy::zeros(n), variant, &RunOptions::default()) {
            Ok(t) => t,
            Err(Error::MaxIterExceeded { trace, .. }) => *trace,
            Err(e) => return Err(e.to_string()),
        };
        runs.push(TraceSummary::new(&trace, Some(&optimum.value)));
    }
    let bounds = bounds::all_bounds(n, m, gamma, None)
        .into_iter()
        .map(|b| (b.name.name().to_string(), b.value))
        .collect();
    to_json(&RunOutput {
        digest: spec_digest,
        optimal_value: optimum.value.into_inner(),
        optimal_policy: optimum.policy.0,
        runs,
        bounds,
    })
}

#[derive(Serialize)]
struct BoundCurves {
    n: usize,
    m: usize,
    gammas: Vec<f64>,
    series: Vec<(String, Vec<f64>)>,
}

/// Gamma-dependent bounds sampled at `points` values of `gamma` spaced
/// evenly in `log(1/(1-gamma))`.
pub fn bound_curves_json(n: usize, m: usize, gamma_min: f64, gamma_max: f64, points: usize) -> Result<String, String> {
    if !(0.0 < gamma_min && gamma_min < gamma_max && gamma_max < 1.0) || points < 2 || n == 0 || m == 0 {
        return Err("need n, m >= 1, 0 < gamma_min < gamma_max < 1 and at least two points".into());
    }
    let (lo, hi) = (-(1.0 - gamma_min).ln(), -(1.0 - gamma_max).ln());
    let gammas: Vec<f64> = (0..points)
        .map(|k| 1.0 - (-(lo + (hi - lo) * k as f64 / (points - 1) as f64)).exp())
        .collect();
    let kinds = [
        BoundKind::HowardGamma,
        BoundKind::HansenReference,
        BoundKind::SimplexGamma,
        BoundKind::SimplexGamma2,
        BoundKind::YeReference,
    ];
    let series = kinds
        .iter()
        .map(|&kind| {
            let values = gammas
                .iter()
                .map(|&g| {
                    bounds::all_bounds(n, m, g, None)
                        .into_iter()
                        .find(|b| b.name == kind)
                        .map_or(f64::NAN, |b| b.value)
                })
                .collect();
            (kind.name().to_string(), values)
        })
        .collect();
    to_json(&BoundCurves { n, m, gammas, series })
}

#[derive(Serialize)]
struct StructureOutput {
    policy: Vec<usize>,
    /// `None` for transient states, else the index of the recurrent class.
    labels: Vec<Option<usize>>,
    classes: Vec<Vec<usize>>,
    visitation: Vec<f64>,
    /// `n / (1 - gamma)`, the upper end of the visitation range.
    visitation_max: f64,
    tau_t: Option<f64>,
    tau_r: Option<f64>,
    assumption2: Option<bool>,
    skipped: Option<String>,
}

/// Classification and visitation vector of one policy (comma-separated
/// actions, empty for all zeros), plus `tau_t`, `tau_r` when enumeration is cheap.
pub fn structure_json(
    family_name: &str,
    n: usize,
    m: usize,
    gamma: f64,
    seed: u64,
    policy: &str,
) -> Result<String, String> {
    let mdp = instance(family_name, n, m, gamma, seed)?;
    let pi = if policy.trim().is_empty() {
        Policy::zeros(n)
    } else {
        Policy(
            policy
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad action {s:?}: {e}")))
                .collect::<Result<_, _>>()?,
        )
    };
    mdp.check_policy(&pi).map_err(|e| e.to_string())?;
    let cls = structure::classify(&mdp, &pi);
    let x = structure::visitation(&mdp, &pi).map_err(|e| e.to_string())?;
    let (tau_t, tau_r, assumption2, skipped) = match structure::structural_constants(&mdp, DEMO_BUDGET) {
        Ok(r) => (Some(r.tau_t), Some(r.tau_r), Some(r.assumption2_holds), None),
        Err(e @ Error::BudgetExceeded { .. }) => (None, None, None, Some(e.to_string())),
        Err(e) => return Err(e.to_string()),
    };
    to_json(&StructureOutput {
        policy: pi.0,
        labels: cls
            .labels
            .iter()
            .map(|l| match l {
                StateLabel::Transient => None,
                StateLabel::Recurrent(c) => Some(*c),
            })
            .collect(),
        classes: cls.classes.iter().map(|c| c.states.clone()).collect(),
        visitation: x.0,
        visitation_max: n as f64 / (1.0 - gamma),
        tau_t,
        tau_r,
        assumption2,
        skipped,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_pi(family: &str, n: usize, m: usize, gamma: f64, seed: u32) -> Result<String, JsValue> {
    js(run_pi_json(family, n, m, gamma, seed as u64))
}

#[wasm_bindgen]
pub fn bound_curves(n: usize, m: usize, gamma_min: f64, gamma_max: f64, points: usize) -> Result<String, JsValue> {
    js(bound_curves_json(n, m, gamma_min, gamma_max, points))
}

#[wasm_bindgen]
pub fn structure(family: &str, n: usize, m: usize, gamma: f64, seed: u32, policy: &str) -> Result<String, JsValue> {
    js(structure_json(family, n, m, gamma, seed as u64, policy))
}
