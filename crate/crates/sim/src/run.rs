//! Closed-loop simulation.
//!
//! Each step `t = 0..=T` records `y(t)`, solves the receding-horizon program,
//! applies its first input and, for `t < T`, measures `y(t+1)` and updates
//! the feasible set, the estimator and the projected nominal model in that
//! order.

use asmpc_core::fir::{advance_regressor, simulate_output, FirModel, Regressor};
use asmpc_core::fps::{fps_vertices, init_fps, update_fps, FeasibleParamSet};
use asmpc_core::mpc::{assemble_robust, assemble_stochastic, first_input, shifted_candidate, solve, MpcSolution};
use asmpc_core::rls::{build_block_regressor, mean_as_matrix, project_estimate, rls_update, ModelEstimate};
use asmpc_core::solver::SolveStatus;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Mode, Scenario};
use crate::disturbance::{generate_disturbance, sequence_hash, DisturbanceSpec};
use crate::error::SimError;

/// Containment slack used for the truth and nesting checks.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    /// `y'Qy + u'Su`.
    pub stage_cost: f64,
    pub status: SolveStatus,
    pub solver_iterations: usize,
    pub fps_rows: usize,
    pub fps_vertices: usize,
    /// Volume of the feasible set when it is a single polytope of dimension
    /// at most 3, `NaN` otherwise.
    pub fps_volume: f64,
    /// Recursion mean.
    pub mean: DVector<f64>,
    /// Mean after projection onto the feasible set; the controller's model.
    pub nominal: DVector<f64>,
    pub cheb_center: DVector<f64>,
    /// `E y(t) > p`.
    pub violation: bool,
    /// Worst constraint violation of the shifted previous plan in this
    /// step's program; `NaN` at `t = 0`.
    pub witness_residual: f64,
    pub truth_in_fps: bool,
    /// Every vertex of `F(t)` lies in `F(t-1)`.
    pub fps_nested: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// The run stopped at step `t`.
    Aborted {
        t: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub mode: Mode,
    pub seed: u64,
    pub disturbance_hash: String,
    pub steps: Vec<StepRecord>,
    pub outcome: RunOutcome,
}

impl RunTrace {
    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.stage_cost).sum()
    }

    pub fn completed(&self) -> bool {
        self.outcome == RunOutcome::Completed
    }

    pub fn violations(&self) -> usize {
        self.steps.iter().filter(|s| s.violation).count()
    }
}

pub fn disturbance_spec(sc: &Scenario) -> DisturbanceSpec {
    DisturbanceSpec {
        family: sc.family,
        bound: sc.w_bar.clone(),
        sigma: sc.sigma.clone(),
    }
}

/// Disturbances `w(0..=T)` for a seed.
pub fn scenario_disturbance(sc: &Scenario, seed: u64) -> Vec<DVector<f64>> {
    generate_disturbance(seed, sc.steps + 1, &disturbance_spec(sc))
}

/// Set-membership and estimator state carried between steps.
struct Learner<'a> {
    sc: &'a Scenario,
    fps: FeasibleParamSet<f64>,
    est: ModelEstimate<f64>,
    nominal: DVector<f64>,
}

impl<'a> Learner<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, SimError> {
        let fps = init_fps(&sc.fps_init, sc.dims, &sc.w_bar)?;
        Ok(Self {
            sc,
            nominal: sc.estimate0.mean.clone(),
            est: sc.estimate0.clone(),
            fps,
        })
    }

    fn measure(&mut self, phi: &Regressor<f64>, y: &DVector<f64>) -> Result<(), SimError> {
        let sc = self.sc;
        self.fps = update_fps(&self.fps, phi, y, &sc.fps_opts)?;
        let blk = build_block_regressor(phi, sc.dims.n_y());
        self.est = rls_update(&self.est, &blk, y, &sc.rls_opts)?;
        self.project()
    }

    fn project(&mut self) -> Result<(), SimError> {
        self.nominal = project_estimate(&self.est, &self.fps)?;
        if self.sc.recurse_on_projection {
            self.est.mean = self.nominal.clone();
        }
        Ok(())
    }

    fn nominal_model(&self) -> Result<FirModel<f64>, SimError> {
        Ok(mean_as_matrix(&self.nominal, self.sc.dims)?)
    }
}

fn fps_volume(sc: &Scenario, fps: &FeasibleParamSet<f64>) -> f64 {
    if fps.rows().len() != 1 || sc.dims.regressor_len() > 3 {
        return f64::NAN;
    }
    fps.rows()[0].volume(sc.geometry()).unwrap_or(f64::NAN)
}

fn quad(m: &nalgebra::DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// One closed-loop run of the scenario's controller.
///
/// A program that cannot be solved at `t = 0` is a scenario error; a later
/// failure truncates the trace and is reported through
/// [`RunTrace::outcome`].
pub fn run_closed_loop(sc: &Scenario, seed: u64) -> Result<RunTrace, SimError> {
    let w = scenario_disturbance(sc, seed);
    run_with_disturbance(sc, seed, &w)
}

pub fn run_with_disturbance(sc: &Scenario, seed: u64, w: &[DVector<f64>]) -> Result<RunTrace, SimError> {
    if w.len() != sc.steps + 1 {
        return Err(SimError::Config(format!(
            "disturbance sequence has {} samples, need {}",
            w.len(),
            sc.steps + 1
        )));
    }
    let mode = sc.mode();
    let geom = sc.geometry();
    let mut trace = RunTrace {
        mode,
        seed,
        disturbance_hash: sequence_hash(w),
        steps: Vec::with_capacity(sc.steps + 1),
        outcome: RunOutcome::Completed,
    };

    let mut learner = Learner::new(sc)?;
    let mut phi = sc.phi0.clone();
    let mut y = simulate_output(&sc.true_model, &phi, &w[0])?;
    let mut previous_fps = learner.fps.clone();
    if sc.absorb_initial {
        learner.measure(&phi, &y)?;
    } else {
        learner.project()?;
    }
    let mut prev_sol: Option<MpcSolution<f64>> = None;

    for t in 0..=sc.steps {
        let step = (|| -> Result<(StepRecord, MpcSolution<f64>), SimError> {
            let fps = &learner.fps;
            let vertices = fps_vertices(fps, geom)?;
            let cheb = fps.chebyshev_center(geom)?;
            let fps_nested = vertices.iter().all(|v| previous_fps.contains(v, MEMBERSHIP_TOL));
            let prog = match mode {
                Mode::Stochastic => assemble_stochastic(
                    &phi,
                    &y,
                    &learner.nominal_model()?,
                    &vertices,
                    &sc.chance,
                    &sc.gamma,
                    &sc.mpc,
                )?,
                Mode::Robust => assemble_robust(&phi, &y, &cheb, &vertices, &sc.chance, &sc.w_bar, &sc.mpc)?,
            };
            let witness_residual = match &prev_sol {
                Some(s) => prog.max_violation(&shifted_candidate(s)?)?,
                None => f64::NAN,
            };
            let sol = solve(&prog)?;
            let u = if sol.is_optimal() {
                first_input(&sol)?
            } else {
                DVector::from_element(sc.dims.n_u(), f64::NAN)
            };
            let rec = StepRecord {
                t,
                stage_cost: quad(&sc.mpc.q_weight, &y) + quad(&sc.mpc.s_weight, &u),
                u,
                y: y.clone(),
                w: w[t].clone(),
                status: sol.status,
                solver_iterations: sol.iterations,
                fps_rows: fps.num_rows(),
                fps_vertices: vertices.len(),
                fps_volume: fps_volume(sc, fps),
                mean: learner.est.mean.clone(),
                nominal: learner.nominal.clone(),
                cheb_center: cheb.to_vector(),
                violation: sc.chance.apply(&y) > sc.chance.p(),
                witness_residual,
                truth_in_fps: fps.contains(&sc.true_model, MEMBERSHIP_TOL),
                fps_nested,
            };
            Ok((rec, sol))
        })();

        let (rec, sol) = match step {
            Ok(v) => v,
            Err(e) if t == 0 => return Err(e),
            Err(e) => {
                trace.outcome = RunOutcome::Aborted {
                    t,
                    reason: e.to_string(),
                };
                return Ok(trace);
            }
        };
        let status = rec.status;
        let u = rec.u.clone();
        trace.steps.push(rec);
        if status != SolveStatus::Optimal {
            if t == 0 {
                return Err(SimError::InitiallyInfeasible(status.to_string()));
            }
            trace.outcome = RunOutcome::Aborted {
                t,
                reason: format!("solver status {status}"),
            };
            return Ok(trace);
        }
        prev_sol = Some(sol);

        if t < sc.steps {
            phi = advance_regressor(sc.dims, &phi, &u)?;
            y = simulate_output(&sc.true_model, &phi, &w[t + 1])?;
            previous_fps = learner.fps.clone();
            if let Err(e) = learner.measure(&phi, &y) {
                trace.outcome = RunOutcome::Aborted {
                    t: t + 1,
                    reason: e.to_string(),
                };
                return Ok(trace);
            }
        }
    }
    Ok(trace)
}

/// Identification without control: inputs are drawn uniformly from
/// `[-amplitude, amplitude]` and only the feasible set and estimator evolve.
pub fn run_estimate_only(sc: &Scenario, seed: u64, amplitude: f64) -> Result<RunTrace, SimError> {
    let w = scenario_disturbance(sc, seed);
    let geom = sc.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a7e);
    let mut trace = RunTrace {
        mode: sc.mode(),
        seed,
        disturbance_hash: sequence_hash(&w),
        steps: Vec::with_capacity(sc.steps + 1),
        outcome: RunOutcome::Completed,
    };
    let mut learner = Learner::new(sc)?;
    let mut phi = sc.phi0.clone();
    let mut y = simulate_output(&sc.true_model, &phi, &w[0])?;
    let mut previous_fps = learner.fps.clone();
    if sc.absorb_initial {
        learner.measure(&phi, &y)?;
    } else {
        learner.project()?;
    }
    for t in 0..=sc.steps {
        let u = DVector::from_fn(sc.dims.n_u(), |_, _| {
            if amplitude > 0.0 {
                rng.random_range(-amplitude..=amplitude)
            } else {
                0.0
            }
        });
        let fps = &learner.fps;
        let vertices = fps_vertices(fps, geom)?;
        let cheb = fps.chebyshev_center(geom)?;
        trace.steps.push(StepRecord {
            t,
            stage_cost: quad(&sc.mpc.q_weight, &y) + quad(&sc.mpc.s_weight, &u),
            u: u.clone(),
            y: y.clone(),
            w: w[t].clone(),
            status: SolveStatus::Optimal,
            solver_iterations: 0,
            fps_rows: fps.num_rows(),
            fps_vertices: vertices.len(),
            fps_volume: fps_volume(sc, fps),
            mean: learner.est.mean.clone(),
            nominal: learner.nominal.clone(),
            cheb_center: cheb.to_vector(),
            violation: sc.chance.apply(&y) > sc.chance.p(),
            witness_residual: f64::NAN,
            truth_in_fps: fps.contains(&sc.true_model, MEMBERSHIP_TOL),
            fps_nested: vertices.iter().all(|v| previous_fps.contains(v, MEMBERSHIP_TOL)),
        });
        if t < sc.steps {
            phi = advance_regressor(sc.dims, &phi, &u)?;
            y = simulate_output(&sc.true_model, &phi, &w[t + 1])?;
            previous_fps = learner.fps.clone();
            learner.measure(&phi, &y)?;
        }
    }
    Ok(trace)
}
