use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use asmpc_sim::config::{Mode, ScenarioConfig};
use asmpc_sim::io::{export_summary, export_trace};
use asmpc_sim::montecarlo::run_monte_carlo;
use asmpc_sim::run::{run_closed_loop, run_estimate_only, RunOutcome};
use asmpc_sim::SimError;
use clap::{Args, Parser, Subcommand};

/// Adaptive stochastic MPC simulation harness.
#[derive(Parser)]
#[command(name = "asmpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file; the bundled default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// One closed-loop run; writes trace_<mode>_<seed>.csv.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the scenario's controller mode.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Batch of seeded runs; writes summary.toml.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        /// Run both controllers on every seed.
        #[arg(long)]
        paired: bool,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        mode: Option<Mode>,
        /// Also write every trace.
        #[arg(long)]
        traces: bool,
    },
    /// Paired stochastic and robust runs; writes summary.toml and costs.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
    },
    /// Feasible-set and estimator evolution under random inputs, no control.
    EstimateOnly {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inputs are uniform on [-amplitude, amplitude].
        #[arg(long, default_value_t = 3.0)]
        amplitude: f64,
    },
    /// Prints the bundled scenario file.
    DefaultConfig,
}

fn load(common: &Common) -> anyhow::Result<ScenarioConfig> {
    Ok(match &common.config {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ScenarioConfig::bundled(),
    })
}

fn out_dir(p: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

/// Exit status 2: the scenario is invalid or cannot start; 3: a run stopped
/// early.
fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { common, seed, mode } => {
            let mut cfg = load(&common)?;
            if let Some(m) = mode {
                cfg.controller.mode = m;
            }
            let sc = cfg.build()?;
            let trace = run_closed_loop(&sc, seed)?;
            out_dir(&common.out)?;
            let path = common.out.join(format!("trace_{}_{seed}.csv", sc.mode().as_str()));
            export_trace(&trace.steps, &path)?;
            println!(
                "mode={} seed={} cost={:.6} violations={} disturbance_sha256={} trace={}",
                sc.mode().as_str(),
                seed,
                trace.total_cost(),
                trace.violations(),
                trace.disturbance_hash,
                path.display()
            );
            if let RunOutcome::Aborted { t, reason } = &trace.outcome {
                eprintln!("run stopped at t={t}: {reason}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Montecarlo {
            common,
            runs,
            paired,
            base_seed,
            mode,
            traces,
        } => {
            let mut cfg = load(&common)?;
            if let Some(m) = mode {
                cfg.controller.mode = m;
            }
            let sc = cfg.build()?;
            let out = run_monte_carlo(&sc, runs, base_seed, paired)?;
            out_dir(&common.out)?;
            export_summary(&out.summary, &common.out.join("summary.toml"))?;
            if traces {
                for (i, seed_runs) in out.traces.iter().enumerate() {
                    for (k, r) in seed_runs.iter().enumerate() {
                        if let Ok(t) = r {
                            let m = out.summary.modes[k].mode.as_str();
                            export_trace(
                                &t.steps,
                                &common.out.join(format!("trace_{m}_{}.csv", out.summary.seeds[i])),
                            )?;
                        }
                    }
                }
            }
            let mut failed = false;
            for m in &out.summary.modes {
                println!(
                    "mode={} runs={} mean_cost={:.6} max_violation_probability={:.4} feasibility_failures={} witness_failures={}",
                    m.mode.as_str(),
                    runs,
                    m.mean_cost,
                    m.max_violation_probability,
                    m.feasibility_failures,
                    m.witness_failures
                );
                failed |= m.feasibility_failures > 0;
            }
            if let Some(c) = &out.summary.comparison {
                println!("stochastic_cheaper_fraction={:.4}", c.stochastic_cheaper_fraction);
            }
            if failed {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Compare {
            common,
            runs,
            base_seed,
        } => {
            let sc = load(&common)?.build()?;
            let out = run_monte_carlo(&sc, runs, base_seed, true)?;
            out_dir(&common.out)?;
            export_summary(&out.summary, &common.out.join("summary.toml"))?;
            let mut wtr = csv::Writer::from_path(common.out.join("costs.csv"))?;
            wtr.write_record(["seed", "disturbance_sha256", "cost_stochastic", "cost_robust"])?;
            let s = out.summary.mode(Mode::Stochastic).expect("paired");
            let r = out.summary.mode(Mode::Robust).expect("paired");
            for i in 0..runs {
                wtr.write_record([
                    out.summary.seeds[i].to_string(),
                    out.summary.disturbance_hashes[i].clone(),
                    s.costs[i].to_string(),
                    r.costs[i].to_string(),
                ])?;
            }
            wtr.flush()?;
            let c = out.summary.comparison.as_ref().expect("paired");
            println!(
                "runs={} mean_cost_stochastic={:.6} mean_cost_robust={:.6} stochastic_cheaper_fraction={:.4}",
                runs, c.mean_cost_stochastic, c.mean_cost_robust, c.stochastic_cheaper_fraction
            );
            if s.feasibility_failures + r.feasibility_failures > 0 {
                return Ok(ExitCode::from(3));
            }
        }
        Command::EstimateOnly {
            common,
            seed,
            amplitude,
        } => {
            let sc = load(&common)?.build()?;
            let trace = run_estimate_only(&sc, seed, amplitude)?;
            out_dir(&common.out)?;
            let path = common.out.join(format!("estimate_{seed}.csv"));
            export_trace(&trace.steps, &path)?;
            let last = trace.steps.last().expect("non-empty");
            let err = (&last.nominal - sc.true_model.to_vector()).norm();
            println!(
                "seed={seed} final_estimation_error={err:.6} fps_vertices={} trace={}",
                last.fps_vertices,
                path.display()
            );
        }
        Command::DefaultConfig => print!("{}", asmpc_sim::config::DEFAULT_TOML),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let scenario = matches!(
                e.downcast_ref::<SimError>(),
                Some(SimError::Config(_) | SimError::InitiallyInfeasible(_) | SimError::Core(_))
            );
            ExitCode::from(if scenario { 2 } else { 1 })
        }
    }
}
