//! Command-line front end: `simulate`, `baseline`, `sweep`, `verify`.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::exec::Execution;
use crate::glm::LinkFunction;
use crate::simulator::{run_replications_with, MeanSe, Policy};
use crate::verification::{verify_suite, Suite};

use config::{parse_config, ExperimentConfig, Overrides};
use output::{emit_traces, render_sweep, summary, write_json, SweepRow};

#[derive(Debug, Parser)]
#[command(
    name = "pp",
    version,
    about = "Perturbed certainty-equivalent pricing experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the perturbed pricing policy and write trace.csv and summary.json.
    Simulate(CommonArgs),
    /// Run pure certainty-equivalent pricing (no perturbation) for comparison.
    Baseline(CommonArgs),
    /// Sweep the perturbation exponent and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated exponents; 0 runs the greedy baseline.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
    },
    /// Run a randomized soundness battery.
    Verify {
        /// prop4 | fp_lemma | concentration | isometry | mqle_oracle
        suite: Suite,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "T")]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub link: Option<LinkFunction>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            horizon: self.horizon,
            eta: self.eta,
            seed: self.seed,
            reps: self.reps,
            link: self.link,
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        parse_config(self.config.as_deref(), &self.overrides())
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let exec = Execution::from_env();
    match cli.command {
        Command::Simulate(args) => simulate(&args, Policy::Perturbed, "simulate", exec),
        Command::Baseline(args) => simulate(&args, Policy::Greedy, "baseline", exec),
        Command::Sweep { common, etas } => {
            let mut cfg = common.resolve()?;
            if let Some(e) = etas {
                for &eta in &e {
                    crate::perturbation::PerturbationSchedule::new(eta)?;
                }
                cfg.etas = e;
            }
            let rows = sweep_eta(&cfg, exec)?;
            output::ensure_dir(&common.out)?;
            std::fs::write(common.out.join("sweep.csv"), render_sweep(&rows))?;
            for r in &rows {
                println!(
                    "eta={:<6} {:<9} ratio={:.4}±{:.4} beta_err_sq={:.5}±{:.5} lambda_ratio={:.4}±{:.4}",
                    r.eta,
                    format!("{:?}", r.policy).to_lowercase(),
                    r.regret_ratio.mean,
                    r.regret_ratio.se,
                    r.beta_err_sq.mean,
                    r.beta_err_sq.se,
                    r.lambda_ratio.mean,
                    r.lambda_ratio.se
                );
            }
            Ok(0)
        }
        Command::Verify {
            suite,
            trials,
            seed,
            out,
        } => {
            let trials = trials.unwrap_or(suite.default_trials());
            let report = verify_suite(suite, trials, seed, exec)?;
            write_json(&report, &out.join(format!("verify_{}.json", suite.name())))?;
            println!(
                "{}: {} checks, {} violations, worst margin {:e}",
                suite.name(),
                report.checks,
                report.violations,
                report.worst_margin
            );
            for (k, v) in &report.metrics {
                println!("  {k} = {v}");
            }
            if !report.passed() {
                if let Some(inst) = &report.instance {
                    println!("  violating instance: {inst}");
                }
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn simulate(args: &CommonArgs, policy: Policy, command: &str, exec: Execution) -> Result<i32> {
    let cfg = args.resolve()?;
    let agg = run_replications_with(&cfg.simulation(), policy, cfg.reps, cfg.seed, exec)?;
    write_outputs(command, &cfg, &agg, &args.out)?;
    let last = agg.final_step();
    println!(
        "{command}: T={} reps={} beta_err_sq={:.6}±{:.6} regret={:.4}±{:.4} ratio={:.4}",
        cfg.horizon,
        agg.n_reps,
        last.beta_err_sq.mean,
        last.beta_err_sq.se,
        last.regret_expected.mean,
        last.regret_expected.se,
        last.regret_ratio.map_or(f64::NAN, |r| r.mean),
    );
    Ok(0)
}

pub fn write_outputs(
    command: &str,
    cfg: &ExperimentConfig,
    agg: &crate::simulator::Aggregate,
    out: &Path,
) -> Result<()> {
    emit_traces(agg, out)?;
    write_json(&summary(command, cfg, agg), &out.join("summary.json"))
}

/// One row per exponent: final regret ratio, squared estimation error and
/// `λ_min`-growth ratio (mean ± se over `cfg.reps`). An exponent of 0 runs
/// the greedy baseline, whose growth ratio is normalized by `t`.
pub fn sweep_eta(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    cfg.etas
        .iter()
        .map(|&eta| {
            let policy = if eta == 0.0 {
                Policy::Greedy
            } else {
                Policy::Perturbed
            };
            let sim = crate::simulator::SimulationConfig {
                eta,
                ..cfg.simulation()
            };
            let agg = run_replications_with(&sim, policy, cfg.reps, cfg.seed, exec)?;
            let last = agg.final_step();
            let nan = MeanSe {
                mean: f64::NAN,
                se: f64::NAN,
            };
            Ok(SweepRow {
                eta,
                policy,
                reps: agg.n_reps,
                regret_ratio: last.regret_ratio.unwrap_or(nan),
                beta_err_sq: last.beta_err_sq,
                lambda_ratio: last.lambda_ratio.unwrap_or(nan),
            })
        })
        .collect()
}
