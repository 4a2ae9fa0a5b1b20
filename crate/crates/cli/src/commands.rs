//! One function per subcommand. Human-readable output goes to `out`; JSON
//! artifacts go to the requested files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pi_bounds::generators::{self, generate, save};
use pi_bounds::solvers::{self, Evaluation, TraceSummary};
use pi_bounds::structure::{self, DEFAULT_BUDGET};
use pi_bounds::{Error, GenSpec, Policy, Result, RunOptions, Tolerance, Variant};

use crate::exit::Outcome;
use crate::report::{verify_instance, VerifyOptions, VerifyReport};
use crate::sweep::{run_sweep, SweepConfig};

/// Environment variable that sets the enumeration budget when `--budget` is absent.
pub const BUDGET_ENV: &str = "PI_BOUNDS_BUDGET";

/// `--budget` wins, then `PI_BOUNDS_BUDGET`, then the default of 10^6.
pub fn resolve_budget(flag: Option<u128>) -> Result<u128> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var(BUDGET_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("{BUDGET_ENV}={s:?} is not a non-negative integer"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn cmd_generate(spec: &GenSpec, out_path: &Path, out: &mut dyn Write) -> Result<Outcome> {
    let mdp = generate(spec)?;
    save(&mdp, out_path)?;
    writeln!(out, "{}", spec.digest()).map_err(io)?;
    writeln!(out, "wrote {}", out_path.display()).map_err(io)?;
    Ok(Outcome::Pass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveArgs {
    pub mdp: PathBuf,
    pub variant: Variant,
    pub tol: Tolerance,
    pub max_iter: Option<usize>,
    pub sherman_morrison: bool,
    pub trace_out: Option<PathBuf>,
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mdp = generators::load(&args.mdp)?;
    let opts = RunOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        evaluation: if args.sherman_morrison {
            Evaluation::ShermanMorrison
        } else {
            Evaluation::Fresh
        },
        ..RunOptions::default()
    };
    let result = solvers::run(&mdp, &Policy::zeros(mdp.n()), args.variant, &opts);
    let (trace, limit) = match result {
        Ok(t) => (t, None),
        Err(Error::MaxIterExceeded { limit, trace }) => (*trace, Some(limit)),
        Err(e) => return Err(e),
    };
    if let Some(path) = &args.trace_out {
        write_json(path, &trace)?;
    }
    let summary = TraceSummary::new(&trace, None);
    writeln!(out, "variant: {}", args.variant).map_err(io)?;
    writeln!(out, "iterations: {}", trace.iterations).map_err(io)?;
    writeln!(out, "final gap: {:e}", trace.final_residual).map_err(io)?;
    writeln!(out, "final policy: {}", trace.final_policy).map_err(io)?;
    let new_classes = summary.events.iter().filter(|e| e.new_recurrent_class).count();
    let broken = summary.events.iter().filter(|e| e.recurrent_class_broken).count();
    writeln!(out, "events: {new_classes} new recurrent classes, {broken} broken").map_err(io)?;
    if trace.cache_rebuilds > 0 {
        writeln!(out, "cache rebuilds: {}", trace.cache_rebuilds).map_err(io)?;
    }
    if let Some(limit) = limit {
        writeln!(out, "stopped at the iteration limit {limit}").map_err(io)?;
        return Ok(Outcome::Limit);
    }
    Ok(Outcome::Pass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyArgs {
    pub mdp: PathBuf,
    pub variants: Vec<Variant>,
    pub options: VerifyOptions,
    pub report_out: Option<PathBuf>,
}

pub fn print_report(r: &VerifyReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "variant: {}", r.variant)?;
    writeln!(out, "iterations: {}{}", r.iterations, if r.truncated { " (truncated)" } else { "" })?;
    match r.optimal {
        Some(ok) => writeln!(
            out,
            "optimality: {} (gap {:e}, oracle {:?})",
            pass(ok),
            r.optimality_gap,
            r.oracle
        )?,
        None => writeln!(out, "optimality: not assessed")?,
    }
    for l in &r.lemmas {
        let slack = l.worst_slack.map_or("n/a".to_string(), |s| format!("{s:e}"));
        writeln!(
            out,
            "Lemma {}: {} ({} checked, coefficient {:.6}, worst slack {slack})",
            l.lemma,
            pass(l.violations == 0),
            l.checked,
            l.coefficient
        )?;
    }
    for i in &r.intervals {
        writeln!(
            out,
            "Lemma {}: {} (longest run without a new class {}, limit {})",
            i.lemma.name(),
            pass(i.passed),
            i.longest_quiet_run,
            i.limit.floor()
        )?;
    }
    for b in &r.bounds.entries {
        writeln!(
            out,
            "Bound {}: {} ({} <= {})",
            b.name.name(),
            pass(b.passed),
            b.iterations,
            b.value.floor()
        )?;
    }
    match (&r.structure, &r.structure_skipped) {
        (Some(s), _) => writeln!(
            out,
            "structure: tau_t = {}, tau_r = {}, assumption2 = {}",
            s.tau_t, s.tau_r, s.assumption2
        )?,
        (None, Some(why)) => writeln!(out, "structure: skipped ({why})")?,
        (None, None) => {}
    }
    for f in r.failures() {
        writeln!(out, "violated: {f}")?;
    }
    writeln!(out, "verdict: {}", if r.truncated && r.failures().is_empty() { "LIMIT" } else { pass(r.passed) })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Exit 1 on any violation, else 2 if a run was truncated, else 0.
pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mdp = generators::load(&args.mdp)?;
    let mut reports = Vec::new();
    for &variant in &args.variants {
        let r = verify_instance(&mdp, variant, &args.options)?;
        print_report(&r, out).map_err(io)?;
        reports.push(r);
    }
    if let Some(path) = &args.report_out {
        write_json(path, &reports)?;
    }
    if reports.iter().any(|r| !r.failures().is_empty()) {
        return Ok(Outcome::Violation);
    }
    if reports.iter().any(|r| r.truncated) {
        return Ok(Outcome::Limit);
    }
    Ok(Outcome::Pass)
}

pub fn cmd_structure(mdp_path: &Path, budget: u128, report_out: Option<&Path>, out: &mut dyn Write) -> Result<Outcome> {
    let mdp = generators::load(mdp_path)?;
    let report = match structure::structural_constants(&mdp, budget) {
        Ok(r) => r,
        Err(e @ Error::BudgetExceeded { .. }) => {
            writeln!(out, "m^n = {}^{} = {} policies", mdp.m(), mdp.n(), mdp.policy_count()).map_err(io)?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let a1 = structure::check_assumption1(&mdp, &report)?;
    writeln!(out, "policies enumerated: {}", report.policies_enumerated).map_err(io)?;
    writeln!(out, "tau_t = {}", report.tau_t).map_err(io)?;
    writeln!(out, "tau_r = {}", report.tau_r).map_err(io)?;
    match &a1 {
        None => writeln!(out, "assumption1 = true").map_err(io)?,
        Some(v) => writeln!(out, "assumption1 = false (state {} under {}, x = {})", v.state, v.policy, v.x).map_err(io)?,
    }
    writeln!(out, "assumption2 = {}", report.assumption2_holds).map_err(io)?;
    if let Some(p) = &report.partition {
        writeln!(out, "partition: T = {:?}, R = {:?}", p.transient, p.recurrent).map_err(io)?;
    }
    if let Some(w) = &report.assumption2_witness {
        writeln!(
            out,
            "witness: state {} is recurrent under {} and transient under {}",
            w.state, w.recurrent_under, w.transient_under
        )
        .map_err(io)?;
    }
    if let Some(path) = report_out {
        write_json(path, &report)?;
    }
    Ok(Outcome::from_passed(a1.is_none()))
}

/// Runs a sweep; `jobs` and `out_dir` override the config file.
pub fn cmd_sweep(
    config_path: &Path,
    jobs: Option<usize>,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let config = SweepConfig::load(config_path)?;
    let jobs = jobs.unwrap_or(config.jobs);
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sweep-out"));
    let summary = run_sweep(&config, jobs)?;
    summary.write(&dir)?;
    writeln!(out, "rows: {}", summary.rows.len()).map_err(io)?;
    writeln!(out, "failed: {}", summary.failed).map_err(io)?;
    for r in summary.rows.iter().filter(|r| !r.passed) {
        writeln!(out, "FAIL {} {}: {}", r.instance_id, r.variant, r.failures.join("; ")).map_err(io)?;
    }
    writeln!(out, "wrote {}", dir.display()).map_err(io)?;
    Ok(Outcome::from_passed(summary.passed()))
}
