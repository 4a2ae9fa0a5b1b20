//! The verification pipeline behind `verify` and `sweep`.

use pi_bounds::bounds::{self, StructuralInputs};
use pi_bounds::solvers::{self, Evaluation};
use pi_bounds::structure::{self, Assumption1Violation, StructuralReport};
use pi_bounds::verify::{self, BoundCheck, ContractionContext, IntervalCheck, LemmaCheck, OracleMethod};
use pi_bounds::{Error, Mdp, Policy, Result, RunOptions, RunTrace, Tolerance, Variant};
use serde::{Deserialize, Serialize};

/// Relative tolerance for agreement with the optimal-value oracle.
pub const OPTIMALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub tol: Tolerance,
    pub max_iter: Option<usize>,
    /// Policy-enumeration budget for the structural constants.
    pub budget: u128,
    pub pi0: Option<Policy>,
    pub evaluation: Evaluation,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: Tolerance::default(),
            max_iter: None,
            budget: structure::DEFAULT_BUDGET,
            pi0: None,
            evaluation: Evaluation::Fresh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub lemma: String,
    pub coefficient: f64,
    pub checked: usize,
    pub violations: usize,
    /// `None` when no iteration had a gap large enough to measure.
    pub worst_slack: Option<f64>,
}

impl From<&LemmaCheck> for LemmaSummary {
    fn from(c: &LemmaCheck) -> Self {
        LemmaSummary {
            lemma: c.lemma.name().to_string(),
            coefficient: c.coefficient,
            checked: c.entries.len(),
            violations: c.violations(),
            worst_slack: c.worst_slack.is_finite().then_some(c.worst_slack),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralSummary {
    pub tau_t: f64,
    pub tau_r: f64,
    pub assumption2: bool,
    pub assumption1_violation: Option<Assumption1Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub variant: Variant,
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub iterations: usize,
    pub truncated: bool,
    pub oracle: OracleMethod,
    /// `||v* - v_final||_inf`.
    pub optimality_gap: f64,
    /// `None` for truncated runs, whose final policy is not expected to be optimal.
    pub optimal: Option<bool>,
    pub lemmas: Vec<LemmaSummary>,
    pub bounds: BoundCheck,
    pub intervals: Vec<IntervalCheck>,
    pub structure: Option<StructuralSummary>,
    /// Why the structural constants were not computed.
    pub structure_skipped: Option<String>,
    pub events: usize,
    /// No failed check and the run was not truncated.
    pub passed: bool,
}

impl VerifyReport {
    /// Names of every failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.optimal == Some(false) {
            out.push(format!("final value off the optimum by {:e}", self.optimality_gap));
        }
        for l in self.lemmas.iter().filter(|l| l.violations > 0) {
            out.push(format!("Lemma {} ({} violations)", l.lemma, l.violations));
        }
        for b in self.bounds.violated() {
            out.push(format!("Bound {}", b.name()));
        }
        for i in self.intervals.iter().filter(|i| !i.passed) {
            out.push(format!(
                "Lemma {} (quiet run {} > {})",
                i.lemma.name(),
                i.longest_quiet_run,
                i.limit.floor()
            ));
        }
        if let Some(v) = self.structure.as_ref().and_then(|s| s.assumption1_violation.as_ref()) {
            out.push(format!("Assumption 1 at state {} under {}", v.state, v.policy));
        }
        out
    }
}

fn structural(mdp: &Mdp, budget: u128) -> Result<(Option<StructuralReport>, Option<String>)> {
    match structure::structural_constants(mdp, budget) {
        Ok(r) => Ok((Some(r), None)),
        Err(Error::BudgetExceeded { policies, budget }) => Ok((
            None,
            Some(format!("{policies} policies exceed the budget of {budget}")),
        )),
        Err(e) => Err(e),
    }
}

/// Runs `variant` with the given options, keeping the partial trace when the
/// iteration cap is hit.
pub fn traced_run(mdp: &Mdp, variant: Variant, opts: &VerifyOptions) -> Result<RunTrace> {
    let pi0 = opts.pi0.clone().unwrap_or_else(|| Policy::zeros(mdp.n()));
    let run_opts = RunOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        evaluation: opts.evaluation,
        ..RunOptions::default()
    };
    match solvers::run(mdp, &pi0, variant, &run_opts) {
        Err(Error::MaxIterExceeded { trace, .. }) => Ok(*trace),
        other => other,
    }
}

/// Solver run, oracle comparison, contraction lemmas, iteration bounds,
/// event intervals and (within budget) structural constants.
pub fn verify_instance(mdp: &Mdp, variant: Variant, opts: &VerifyOptions) -> Result<VerifyReport> {
    let (report, structure_skipped) = structural(mdp, opts.budget)?;
    let structure = match &report {
        Some(r) => Some(StructuralSummary {
            tau_t: r.tau_t,
            tau_r: r.tau_r,
            assumption2: r.assumption2_holds,
            assumption1_violation: structure::check_assumption1(mdp, r)?,
        }),
        None => None,
    };

    let optimum = verify::optimal_oracle(mdp)?;
    let trace = traced_run(mdp, variant, opts)?;
    let optimality_gap = optimum
        .value
        .iter()
        .zip(trace.final_value.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let optimal = (!trace.truncated)
        .then(|| optimality_gap <= OPTIMALITY_TOL * (1.0 + optimum.value.norm_inf()));

    let ctx = ContractionContext {
        tau_r: report.as_ref().map(|r| r.tau_r),
        assumption2: report.as_ref().is_some_and(|r| r.assumption2_holds),
    };
    let lemma_checks = verify::check_contraction(&trace, &optimum.value, mdp.gamma(), ctx);
    let inputs = report.as_ref().map(|r| StructuralInputs {
        tau_t: r.tau_t,
        tau_r: r.tau_r,
        assumption2: r.assumption2_holds,
    });
    let bound_reports = bounds::all_bounds(mdp.n(), mdp.m(), mdp.gamma(), inputs);
    let bound_check = verify::check_bounds(&trace, &bound_reports);
    let intervals = verify::check_event_intervals(
        &trace,
        &bounds::bound_event_lemmas(mdp.n(), mdp.m(), report.as_ref().map_or(1.0, |r| r.tau_t)),
        mdp.is_deterministic(),
        report.is_some(),
    );

    let mut out = VerifyReport {
        variant,
        n: mdp.n(),
        m: mdp.m(),
        gamma: mdp.gamma(),
        iterations: trace.iterations,
        truncated: trace.truncated,
        oracle: optimum.method,
        optimality_gap,
        optimal,
        lemmas: lemma_checks.iter().map(LemmaSummary::from).collect(),
        bounds: bound_check,
        intervals,
        structure,
        structure_skipped,
        events: trace.event_count(),
        passed: false,
    };
    out.passed = out.failures().is_empty() && !out.truncated;
    Ok(out)
}
