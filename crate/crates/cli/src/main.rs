use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pi_bounds::solvers::Evaluation;
use pi_bounds::{Family, GenSpec, Policy, Tolerance, Variant};
use pi_bounds_cli::commands::{self, SolveArgs, VerifyArgs};
use pi_bounds_cli::exit;
use pi_bounds_cli::report::VerifyOptions;

/// Exact policy iteration for discounted MDPs, with bound and lemma checks.
///
/// Exit codes: 0 pass, 1 check violation, 2 budget or iteration limit,
/// 3 input error, 4 internal inconsistency.
#[derive(Parser)]
#[command(name = "pi-bounds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded MDP and write it as JSON.
    Generate(GenerateArgs),
    /// Run policy iteration and print a summary.
    Solve(SolveCli),
    /// Run, compare against the optimum, and check every applicable lemma and bound.
    Verify(VerifyCli),
    /// Compute tau_t, tau_r and the Assumption 1/2 verdicts by enumeration.
    Structure(StructureCli),
    /// Verify a grid of generated instances and write JSON/CSV summaries.
    Sweep(SweepCli),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    DenseRandom,
    Deterministic,
    Garnet,
    TwoBlock,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Howard,
    Simplex,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Howard => vec![Variant::Howard],
            VariantArg::Simplex => vec![Variant::Simplex],
            VariantArg::Both => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SingleVariant {
    Howard,
    Simplex,
}

impl From<SingleVariant> for Variant {
    fn from(v: SingleVariant) -> Self {
        match v {
            SingleVariant::Howard => Variant::Howard,
            SingleVariant::Simplex => Variant::Simplex,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Support size of each transition row (garnet).
    #[arg(long)]
    branching: Option<usize>,
    /// Size of the transient block (two-block); the rest is recurrent.
    #[arg(long)]
    transient: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    reward_min: f64,
    #[arg(long, default_value_t = 1.0)]
    reward_max: f64,
    #[arg(long)]
    out: PathBuf,
}

impl GenerateArgs {
    fn spec(&self) -> GenSpec {
        let family = match self.family {
            FamilyArg::DenseRandom => Family::DenseRandom,
            FamilyArg::Deterministic => Family::Deterministic,
            FamilyArg::Garnet => Family::Garnet {
                branching: self.branching.unwrap_or(self.n.div_ceil(2).max(1)),
            },
            FamilyArg::TwoBlock => {
                let transient = self.transient.unwrap_or(self.n / 2);
                Family::TwoBlockAssumption2 {
                    transient,
                    recurrent: self.n.saturating_sub(transient),
                }
            }
        };
        GenSpec {
            reward_range: (self.reward_min, self.reward_max),
            ..GenSpec::new(family, self.n, self.m, self.gamma, self.seed)
        }
    }
}

#[derive(Args)]
struct RunFlags {
    /// Relative switching tolerance: advantages above tol * (1 + ||v||) count.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iteration cap (default: the tightest gamma-dependent bound plus one).
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct SolveCli {
    mdp: PathBuf,
    #[arg(long, value_enum, default_value = "howard")]
    variant: SingleVariant,
    #[command(flatten)]
    run: RunFlags,
    /// Evaluate Simplex-PI policies by rank-one inverse updates.
    #[arg(long)]
    sherman_morrison: bool,
    /// Write the full RunTrace JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyCli {
    mdp: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    variant: VariantArg,
    #[command(flatten)]
    run: RunFlags,
    /// Policy-enumeration budget for tau_t / tau_r (overrides PI_BOUNDS_BUDGET).
    #[arg(long)]
    budget: Option<u128>,
    /// Initial policy as comma-separated actions (default: all zeros).
    #[arg(long, value_delimiter = ',')]
    pi0: Option<Vec<usize>>,
    /// Write the verification reports as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StructureCli {
    mdp: PathBuf,
    #[arg(long)]
    budget: Option<u128>,
    /// Write the StructuralReport JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCli {
    config: PathBuf,
    /// Worker threads (overrides the config).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> pi_bounds::Result<exit::Outcome> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Generate(a) => commands::cmd_generate(&a.spec(), &a.out, &mut out),
        Command::Solve(a) => commands::cmd_solve(
            &SolveArgs {
                mdp: a.mdp,
                variant: a.variant.into(),
                tol: Tolerance::Relative(a.run.tol),
                max_iter: a.run.max_iter,
                sherman_morrison: a.sherman_morrison,
                trace_out: a.out,
            },
            &mut out,
        ),
        Command::Verify(a) => commands::cmd_verify(
            &VerifyArgs {
                mdp: a.mdp,
                variants: a.variant.variants(),
                options: VerifyOptions {
                    tol: Tolerance::Relative(a.run.tol),
                    max_iter: a.run.max_iter,
                    budget: commands::resolve_budget(a.budget)?,
                    pi0: a.pi0.map(Policy),
                    evaluation: Evaluation::Fresh,
                },
                report_out: a.out,
            },
            &mut out,
        ),
        Command::Structure(a) => commands::cmd_structure(
            &a.mdp,
            commands::resolve_budget(a.budget)?,
            a.out.as_deref(),
            &mut out,
        ),
        Command::Sweep(a) => commands::cmd_sweep(&a.config, a.jobs, a.out.as_deref(), &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match dispatch(cli) {
        Ok(outcome) => outcome.code(),
        Err(e) => {
            eprintln!("error[{}]: {e}", exit::error_kind(&e));
            exit::error_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
