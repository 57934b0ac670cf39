//! Batches of seeded runs and their aggregate statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, Scenario};
use crate::error::SimError;
use crate::run::{run_with_disturbance, scenario_disturbance, RunTrace};

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

/// Statistics of one controller over a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSummary {
    pub mode: Mode,
    /// Realized closed-loop cost per run, `NaN` for runs that did not
    /// complete.
    pub costs: Vec<f64>,
    pub mean_cost: f64,
    /// Fraction of runs with `E y(t) > p`, per step `t`.
    pub violation_probability: Vec<f64>,
    pub max_violation_probability: f64,
    /// Runs that failed to start or stopped early.
    pub feasibility_failures: usize,
    /// Steps whose shifted previous plan violated the step's program by
    /// more than the witness tolerance.
    pub witness_failures: usize,
    pub max_witness_residual: f64,
    /// Runs in which the true model left the feasible set or the set grew.
    pub membership_failures: usize,
    pub total_violations: usize,
    /// `||mu(0) - H_a||` for the configured prior mean.
    pub prior_estimation_error: f64,
    /// `||nominal(T) - H_a||` per run.
    pub final_estimation_error: Vec<f64>,
    /// `||center(T) - H_a||` per run.
    pub final_center_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairedComparison {
    /// Fraction of seeds where the stochastic controller is strictly cheaper.
    pub stochastic_cheaper_fraction: f64,
    pub mean_cost_stochastic: f64,
    pub mean_cost_robust: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSummary {
    pub format_version: u32,
    pub runs: usize,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    /// Hash of each seed's disturbance sequence, shared by both controllers.
    pub disturbance_hashes: Vec<String>,
    pub modes: Vec<ModeSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<PairedComparison>,
}

impl MonteCarloSummary {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Witness residuals above this count as failures.
pub const WITNESS_TOL: f64 = 1e-6;

/// Runs for one seed: the scenario's own controller, or both when paired.
pub type SeedResult = Vec<Result<RunTrace, String>>;

pub struct MonteCarloOutput {
    pub summary: MonteCarloSummary,
    /// `traces[i][k]`: seed `i`, controller `k` in `summary.modes` order.
    pub traces: Vec<SeedResult>,
}

/// Runs seeds `base_seed .. base_seed + n_runs` in parallel. Paired batches
/// run both controllers on the same disturbance sequence.
pub fn run_monte_carlo(
    sc: &Scenario,
    n_runs: usize,
    base_seed: u64,
    paired: bool,
) -> Result<MonteCarloOutput, SimError> {
    if n_runs == 0 {
        return Err(SimError::Config("at least one run is required".into()));
    }
    let modes: Vec<Mode> = if paired {
        vec![Mode::Stochastic, Mode::Robust]
    } else {
        vec![sc.mode()]
    };
    let scenarios: Vec<Scenario> = modes.iter().map(|&m| sc.with_mode(m)).collect();
    let seeds: Vec<u64> = (0..n_runs as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let results: Vec<(String, SeedResult)> = seeds
        .par_iter()
        .map(|&seed| {
            let w = scenario_disturbance(sc, seed);
            let hash = crate::disturbance::sequence_hash(&w);
            let runs = scenarios
                .iter()
                .map(|s| run_with_disturbance(s, seed, &w).map_err(|e| e.to_string()))
                .collect();
            (hash, runs)
        })
        .collect();

    let (hashes, traces): (Vec<String>, Vec<SeedResult>) = results.into_iter().unzip();
    let mode_summaries: Vec<ModeSummary> = modes
        .iter()
        .enumerate()
        .map(|(k, &mode)| summarize_mode(sc, mode, traces.iter().map(|r| &r[k])))
        .collect();
    let comparison = paired.then(|| {
        let s = &mode_summaries[0].costs;
        let r = &mode_summaries[1].costs;
        let cheaper = s.iter().zip(r).filter(|(a, b)| a < b).count();
        PairedComparison {
            stochastic_cheaper_fraction: cheaper as f64 / n_runs as f64,
            mean_cost_stochastic: mode_summaries[0].mean_cost,
            mean_cost_robust: mode_summaries[1].mean_cost,
        }
    });
    Ok(MonteCarloOutput {
        summary: MonteCarloSummary {
            format_version: SUMMARY_FORMAT_VERSION,
            runs: n_runs,
            base_seed,
            seeds,
            disturbance_hashes: hashes,
            modes: mode_summaries,
            comparison,
        },
        traces,
    })
}

fn error_to_truth(sc: &Scenario, v: &nalgebra::DVector<f64>) -> f64 {
    (v - sc.true_model.to_vector()).norm()
}

/// Aggregates traces of one controller.
pub fn summarize_mode<'a>(
    sc: &Scenario,
    mode: Mode,
    runs: impl Iterator<Item = &'a Result<RunTrace, String>>,
) -> ModeSummary {
    let steps = sc.steps + 1;
    let mut hits = vec![0usize; steps];
    let mut seen = vec![0usize; steps];
    let mut out = ModeSummary {
        mode,
        costs: Vec::new(),
        mean_cost: 0.0,
        violation_probability: Vec::new(),
        max_violation_probability: 0.0,
        feasibility_failures: 0,
        witness_failures: 0,
        max_witness_residual: 0.0,
        membership_failures: 0,
        total_violations: 0,
        prior_estimation_error: error_to_truth(sc, &sc.estimate0.mean),
        final_estimation_error: Vec::new(),
        final_center_error: Vec::new(),
    };
    for run in runs {
        let trace = match run {
            Ok(t) => t,
            Err(_) => {
                out.feasibility_failures += 1;
                out.costs.push(f64::NAN);
                out.final_estimation_error.push(f64::NAN);
                out.final_center_error.push(f64::NAN);
                continue;
            }
        };
        if !trace.completed() {
            out.feasibility_failures += 1;
        }
        for s in &trace.steps {
            seen[s.t] += 1;
            if s.violation {
                hits[s.t] += 1;
                out.total_violations += 1;
            }
            if s.witness_residual.is_finite() {
                out.max_witness_residual = out.max_witness_residual.max(s.witness_residual);
                if s.witness_residual > WITNESS_TOL {
                    out.witness_failures += 1;
                }
            }
        }
        if trace.steps.iter().any(|s| !s.truth_in_fps || !s.fps_nested) {
            out.membership_failures += 1;
        }
        out.costs.push(if trace.completed() {
            trace.total_cost()
        } else {
            f64::NAN
        });
        let last = trace.steps.last();
        out.final_estimation_error
            .push(last.map_or(f64::NAN, |s| error_to_truth(sc, &s.nominal)));
        out.final_center_error
            .push(last.map_or(f64::NAN, |s| error_to_truth(sc, &s.cheb_center)));
    }
    out.violation_probability = hits
        .iter()
        .zip(&seen)
        .map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 })
        .collect();
    out.max_violation_probability = out.violation_probability.iter().copied().fold(0.0, f64::max);
    let finite: Vec<f64> = out.costs.iter().copied().filter(|c| c.is_finite()).collect();
    out.mean_cost = if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    out
}
