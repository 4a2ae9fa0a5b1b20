//! Grid sweeps: every instance of the grid is verified under every requested
//! variant, in parallel across instances, with output ordered by instance id.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use pi_bounds::generators::generate;
use pi_bounds::structure::DEFAULT_BUDGET;
use pi_bounds::{Error, Family, GenSpec, Result, Tolerance, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exit;
use crate::report::{verify_instance, VerifyOptions, VerifyReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Seeds {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, count } => (*start..start.saturating_add(*count)).collect(),
        }
    }
}

/// Cartesian product `families x n x m x gamma x seeds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub families: Vec<Family>,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub gamma: Vec<f64>,
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_range: Option<(f64, f64)>,
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grids: Vec<Grid>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<Tolerance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u128>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.variants.is_empty() {
            return bad("sweep needs at least one variant".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be >= 1".into());
        }
        if self.grids.is_empty() {
            return bad("sweep grid is empty".into());
        }
        for (g, grid) in self.grids.iter().enumerate() {
            if grid.families.is_empty()
                || grid.n.is_empty()
                || grid.m.is_empty()
                || grid.gamma.is_empty()
                || grid.seeds.values().is_empty()
            {
                return bad(format!("grid {g} has an empty axis"));
            }
            let seeds = grid.seeds.values();
            if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
                return bad(format!("grid {g} repeats a seed"));
            }
        }
        Ok(())
    }

    /// Every instance of the grid in a fixed order, with ids.
    pub fn instances(&self) -> Vec<(String, GenSpec)> {
        let mut specs = Vec::new();
        for grid in &self.grids {
            for family in &grid.families {
                for &n in &grid.n {
                    for &m in &grid.m {
                        for &gamma in &grid.gamma {
                            for seed in grid.seeds.values() {
                                let mut spec = GenSpec::new(*family, n, m, gamma, seed);
                                if let Some(range) = grid.reward_range {
                                    spec.reward_range = range;
                                }
                                specs.push(spec);
                            }
                        }
                    }
                }
            }
        }
        let width = specs.len().to_string().len().max(6);
        specs
            .into_iter()
            .enumerate()
            .map(|(k, s)| (format!("{k:0width$}"), s))
            .collect()
    }

    fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            tol: self.tol.unwrap_or_default(),
            max_iter: self.max_iter,
            budget: self.budget.unwrap_or(DEFAULT_BUDGET),
            ..VerifyOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOutcome {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub instance_id: String,
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub seed: u64,
    pub variant: Variant,
    pub iterations: usize,
    pub bounds: Vec<BoundOutcome>,
    /// Smallest `coefficient - ratio` over all contraction lemmas checked.
    pub worst_contraction_slack: Option<f64>,
    pub events: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

impl SweepRow {
    fn from_report(id: &str, spec: &GenSpec, r: &VerifyReport) -> Self {
        let mut failures = r.failures();
        if r.truncated {
            failures.push(format!("truncated after {} iterations", r.iterations));
        }
        SweepRow {
            instance_id: id.to_string(),
            family: spec.family.name().to_string(),
            n: spec.n,
            m: spec.m,
            gamma: spec.gamma,
            seed: spec.seed,
            variant: r.variant,
            iterations: r.iterations,
            bounds: r
                .bounds
                .entries
                .iter()
                .map(|e| BoundOutcome {
                    name: e.name.name().to_string(),
                    value: e.value,
                    passed: e.passed,
                })
                .collect(),
            worst_contraction_slack: r
                .lemmas
                .iter()
                .filter_map(|l| l.worst_slack)
                .reduce(f64::min),
            events: r.events,
            passed: r.passed,
            failures,
        }
    }

    fn from_error(id: &str, spec: &GenSpec, variant: Variant, err: &Error) -> Self {
        SweepRow {
            instance_id: id.to_string(),
            family: spec.family.name().to_string(),
            n: spec.n,
            m: spec.m,
            gamma: spec.gamma,
            seed: spec.seed,
            variant,
            iterations: 0,
            bounds: Vec::new(),
            worst_contraction_slack: None,
            events: 0,
            passed: false,
            failures: vec![format!("error (exit {}): {err}", exit::error_code(err))],
        }
    }

    /// `max iterations / bound` over the bounds of this row with a positive value.
    pub fn max_bound_ratio(&self) -> Option<f64> {
        self.bounds
            .iter()
            .filter(|b| b.value > 0.0)
            .map(|b| self.iterations as f64 / b.value)
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub variant: Variant,
    pub instances: usize,
    pub max_iterations: usize,
    pub max_bound_ratio: Option<f64>,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<Aggregate>,
    pub failed: usize,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "instance_id",
            "family",
            "n",
            "m",
            "gamma",
            "seed",
            "variant",
            "iterations",
            "events",
            "worst_contraction_slack",
            "max_bound_ratio",
            "bounds",
            "passed",
            "failures",
        ])
        .map_err(csv_error)?;
        for r in &self.rows {
            let bounds = r
                .bounds
                .iter()
                .map(|b| format!("{}={}:{}", b.name, num(b.value), if b.passed { "pass" } else { "fail" }))
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                r.instance_id.clone(),
                r.family.clone(),
                r.n.to_string(),
                r.m.to_string(),
                num(r.gamma),
                r.seed.to_string(),
                r.variant.to_string(),
                r.iterations.to_string(),
                r.events.to_string(),
                opt_num(r.worst_contraction_slack),
                opt_num(r.max_bound_ratio()),
                bounds,
                r.passed.to_string(),
                r.failures.join(";"),
            ])
            .map_err(csv_error)?;
        }
        finish(w)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "family",
            "n",
            "m",
            "gamma",
            "variant",
            "instances",
            "max_iterations",
            "max_bound_ratio",
            "failed",
        ])
        .map_err(csv_error)?;
        for a in &self.aggregates {
            w.write_record([
                a.family.clone(),
                a.n.to_string(),
                a.m.to_string(),
                num(a.gamma),
                a.variant.to_string(),
                a.instances.to_string(),
                a.max_iterations.to_string(),
                opt_num(a.max_bound_ratio),
                a.failed.to_string(),
            ])
            .map_err(csv_error)?;
        }
        finish(w)
    }

    /// Writes `summary.json`, `rows.csv` and `aggregates.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), self.to_json())?;
        fs::write(dir.join("rows.csv"), self.rows_csv()?)?;
        fs::write(dir.join("aggregates.csv"), self.aggregates_csv()?)?;
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn verify_spec(id: &str, spec: &GenSpec, variants: &[Variant], opts: &VerifyOptions) -> Vec<SweepRow> {
    let mdp = match generate(spec) {
        Ok(mdp) => mdp,
        Err(e) => {
            return variants
                .iter()
                .map(|&v| SweepRow::from_error(id, spec, v, &e))
                .collect()
        }
    };
    variants
        .iter()
        .map(|&v| match verify_instance(&mdp, v, opts) {
            Ok(r) => SweepRow::from_report(id, spec, &r),
            Err(e) => SweepRow::from_error(id, spec, v, &e),
        })
        .collect()
}

/// Runs the sweep on `jobs` worker threads. The result does not depend on `jobs`.
pub fn run_sweep(config: &SweepConfig, jobs: usize) -> Result<SweepSummary> {
    config.validate()?;
    let opts = config.verify_options();
    let instances = config.instances();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        instances
            .par_iter()
            .flat_map_iter(|(id, spec)| verify_spec(id, spec, &config.variants, &opts))
            .collect()
    });
    rows.sort_by(|a, b| {
        (&a.instance_id, a.variant.name()).cmp(&(&b.instance_id, b.variant.name()))
    });

    let mut groups: BTreeMap<(String, usize, usize, u64, &'static str), Aggregate> = BTreeMap::new();
    for r in &rows {
        let key = (r.family.clone(), r.n, r.m, r.gamma.to_bits(), r.variant.name());
        let a = groups.entry(key).or_insert_with(|| Aggregate {
            family: r.family.clone(),
            n: r.n,
            m: r.m,
            gamma: r.gamma,
            variant: r.variant,
            instances: 0,
            max_iterations: 0,
            max_bound_ratio: None,
            failed: 0,
        });
        a.instances += 1;
        a.max_iterations = a.max_iterations.max(r.iterations);
        if let Some(ratio) = r.max_bound_ratio() {
            a.max_bound_ratio = Some(a.max_bound_ratio.map_or(ratio, |x| x.max(ratio)));
        }
        a.failed += usize::from(!r.passed);
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    Ok(SweepSummary {
        rows,
        aggregates: groups.into_values().collect(),
        failed,
    })
}
