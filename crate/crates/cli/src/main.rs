use bmdp_cli::commands::{cmd_bench, cmd_gen, cmd_learn, cmd_simulate, cmd_solve};
use bmdp_cli::gen::GenParams;
use bmdp_core::learner::{LearnParams, Schedule};
use bmdp_core::sim::DEFAULT_MAX_STEPS;
use bmdp_core::solver::SolveParams;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;

/// Branching Markov decision processes: exact solving, model-free
/// Q-learning, simulation, model generation, and benchmarks.
#[derive(Parser)]
#[command(name = "bmdp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Constant,
    Harmonic,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Schedule {
        match s {
            ScheduleArg::Constant => Schedule::Constant,
            ScheduleArg::Harmonic => Schedule::Harmonic,
        }
    }
}

#[derive(Args)]
struct SolveOpts {
    /// Sup-norm stopping tolerance for value iteration.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    /// Values above this threshold are treated as diverging to infinity.
    #[arg(long, default_value_t = 1e12)]
    v_max: f64,
}

impl SolveOpts {
    fn params(&self) -> SolveParams {
        SolveParams {
            tolerance: self.tol,
            max_iterations: self.max_iters,
            v_max: self.v_max,
        }
    }
}

// Same knobs as `SolveOpts`, renamed so they can sit next to the learner's
// `--tol` in the bench command.
#[derive(Args)]
struct BenchSolveOpts {
    /// Sup-norm stopping tolerance for the exact solver.
    #[arg(long, default_value_t = 1e-9)]
    solve_tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    /// Values above this threshold are treated as diverging to infinity.
    #[arg(long, default_value_t = 1e12)]
    v_max: f64,
}

impl BenchSolveOpts {
    fn params(&self) -> SolveParams {
        SolveParams {
            tolerance: self.solve_tol,
            max_iterations: self.max_iters,
            v_max: self.v_max,
        }
    }
}

#[derive(Args)]
struct LearnOpts {
    /// Exploration rate.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Learning rate.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Q-value tolerance when extracting the learned strategy.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Maximum episode length.
    #[arg(long = "ep-l", default_value_t = 30)]
    ep_l: usize,
    /// Number of episodes.
    #[arg(long = "ep-n", default_value_t = 20_000)]
    ep_n: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Constant)]
    schedule: ScheduleArg,
    /// Initial Q-table fill.
    #[arg(long, default_value_t = 0.0)]
    q_init: f64,
    /// Master seed; omitted means a fresh one is drawn and printed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    trials: usize,
}

impl LearnOpts {
    fn params(&self, seed: u64) -> LearnParams {
        LearnParams {
            epsilon: self.epsilon,
            alpha: self.alpha,
            schedule: self.schedule.into(),
            tol: self.tol,
            ep_l: self.ep_l,
            ep_n: self.ep_n,
            seed,
            q_init: self.q_init,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute exact optimal values and an optimal strategy.
    Solve {
        model: PathBuf,
        #[command(flatten)]
        solve: SolveOpts,
    },
    /// Learn values model-free with Q-learning.
    Learn {
        model: PathBuf,
        #[command(flatten)]
        learn: LearnOpts,
        /// Also solve exactly and print the relative error.
        #[arg(long)]
        compare: bool,
        /// Write per-trial learning curves (CSV, suffixed `_t<i>`).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write a JSON report.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Monte-Carlo estimate of a strategy's expected total cost.
    Simulate {
        model: PathBuf,
        /// `optimal` or a full `Type=action,...` assignment.
        #[arg(long, default_value = "optimal")]
        strategy: String,
        #[arg(short = 'n', long, default_value_t = 100_000)]
        episodes: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Dump the first episode's trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate a random model.
    Gen {
        #[arg(long, default_value_t = 5)]
        n_types: usize,
        #[arg(long, default_value_t = 3)]
        max_actions: usize,
        #[arg(long, default_value_t = 3)]
        max_outcomes: usize,
        #[arg(long, default_value_t = 3)]
        max_offspring_len: usize,
        #[arg(long, default_value_t = 1.0)]
        cost_min: f64,
        #[arg(long, default_value_t = 10.0)]
        cost_max: f64,
        /// Cap expected offspring so every strategy has finite cost.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        subcritical: bool,
        /// Restrict offspring to higher type indices (acyclic model).
        #[arg(long)]
        hierarchical: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve and learn a whole suite of models, emitting a results table.
    Bench {
        /// Directory of `.bmdp` files; the embedded suite when omitted.
        #[arg(long)]
        suite_dir: Option<PathBuf>,
        #[command(flatten)]
        learn: LearnOpts,
        #[command(flatten)]
        solve: BenchSolveOpts,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Use the given seed, or draw one from entropy and print it so the run
/// can be reproduced.
fn resolve_seed(out: &mut dyn Write, seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            let _ = writeln!(out, "seed {s}");
            s
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match cli.command {
        Command::Solve { model, solve } => cmd_solve(&mut out, &model, &solve.params()),
        Command::Learn {
            model,
            learn,
            compare,
            csv,
            json,
        } => {
            let seed = resolve_seed(&mut out, learn.seed);
            cmd_learn(
                &mut out,
                &model,
                &learn.params(seed),
                learn.trials,
                compare,
                csv.as_deref(),
                json.as_deref(),
                &SolveParams::default(),
            )
        }
        Command::Simulate {
            model,
            strategy,
            episodes,
            max_steps,
            seed,
            trace,
        } => {
            let seed = resolve_seed(&mut out, seed);
            cmd_simulate(
                &mut out,
                &model,
                &strategy,
                episodes,
                max_steps,
                seed,
                trace.as_deref(),
            )
        }
        Command::Gen {
            n_types,
            max_actions,
            max_outcomes,
            max_offspring_len,
            cost_min,
            cost_max,
            subcritical,
            hierarchical,
            seed,
            output,
        } => {
            let seed = resolve_seed(&mut out, seed);
            let params = GenParams {
                n_types,
                max_actions,
                max_outcomes,
                max_offspring_len,
                cost_range: (cost_min, cost_max),
                subcritical,
                seed,
            };
            cmd_gen(&mut out, &params, hierarchical, output.as_deref())
        }
        Command::Bench {
            suite_dir,
            learn,
            solve,
            csv,
            json,
        } => {
            let seed = resolve_seed(&mut out, learn.seed);
            cmd_bench(
                &mut out,
                suite_dir.as_deref(),
                &learn.params(seed),
                &solve.params(),
                learn.trials,
                csv.as_deref(),
                json.as_deref(),
            )
        }
    };
    std::process::exit(code);
}
