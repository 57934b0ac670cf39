//! Scenario files.
//!
//! A scenario is a TOML document with the sections `dims`, `plant`,
//! `controller`, `chance`, `disturbance`, `fps`, `estimator`, `run` and the
//! optional `geometry`. Unknown keys are rejected. Matrices are arrays of
//! rows. See `scenarios/default.toml` for a complete example.

use std::path::Path;

use asmpc_core::chance::{build_gamma, AppendedCovariance, ChanceSpec};
use asmpc_core::fir::{FirModel, Regressor};
use asmpc_core::fps::{FpsInitSpec, FpsOptions};
use asmpc_core::mpc::{ControllerMode, MpcConfig};
use asmpc_core::polytope::GeometryTolerances;
use asmpc_core::rls::{ModelEstimate, RlsOptions};
use asmpc_core::FirDims;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// The bundled default scenario.
pub const DEFAULT_TOML: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dims: DimsSection,
    pub plant: PlantSection,
    pub controller: ControllerSection,
    pub chance: ChanceSection,
    pub disturbance: DisturbanceSection,
    pub fps: FpsSection,
    pub estimator: EstimatorSection,
    pub run: RunSection,
    #[serde(default)]
    pub geometry: GeometrySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsSection {
    pub n_u: usize,
    pub n_y: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// `n_y` rows of `n_u m` coefficients.
    pub true_model: Vec<Vec<f64>>,
    pub initial_regressor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Stochastic,
    Robust,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Stochastic => "stochastic",
            Mode::Robust => "robust",
        }
    }
}

impl From<Mode> for ControllerMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Stochastic => ControllerMode::Stochastic,
            Mode::Robust => ControllerMode::Robust,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stochastic" => Ok(Mode::Stochastic),
            "robust" => Ok(Mode::Robust),
            other => Err(format!("unknown mode '{other}' (expected stochastic or robust)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub mode: Mode,
    pub horizon: usize,
    pub q_weight: Vec<Vec<f64>>,
    pub s_weight: Vec<Vec<f64>>,
    pub c_mat: Vec<Vec<f64>>,
    pub g_vec: Vec<f64>,
    #[serde(default)]
    pub cone_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChanceSection {
    pub e_row: Vec<f64>,
    pub p: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Uniform,
    /// Zero-mean normal with standard deviation `sigma`, redrawn until it
    /// falls inside the bound.
    TruncatedGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub family: Family,
    pub bound: Vec<f64>,
    /// Covariance handed to the estimator and the chance constraint.
    pub variance: Vec<Vec<f64>>,
    /// Per-output standard deviation before truncation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpsSection {
    pub magnitude: f64,
    pub decay: f64,
    #[serde(default = "default_max_rows")]
    pub max_rows: usize,
    /// Cut the initial set with the measurement taken at `t = 0` (and feed
    /// it to the estimator) before the first control move.
    #[serde(default = "default_true")]
    pub absorb_initial_measurement: bool,
}

fn default_max_rows() -> usize {
    200
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(default)]
    pub joseph: bool,
    /// Continue the recursion from the projected mean instead of the raw one.
    #[serde(default)]
    pub recurse_on_projection: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub rank_tol: f64,
    pub feasibility_tol: f64,
    pub redundancy_tol: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = GeometryTolerances::<f64>::default();
        Self {
            rank_tol: g.rank,
            feasibility_tol: g.feasibility,
            redundancy_tol: g.redundancy,
        }
    }
}

/// Validated scenario with every quantity in library form.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub raw: ScenarioConfig,
    pub dims: FirDims,
    pub true_model: FirModel<f64>,
    pub phi0: Regressor<f64>,
    pub mpc: MpcConfig<f64>,
    pub chance: ChanceSpec<f64>,
    pub gamma: AppendedCovariance<f64>,
    pub w_bar: DVector<f64>,
    pub sigma_w2: DMatrix<f64>,
    pub family: Family,
    pub sigma: DVector<f64>,
    pub fps_init: FpsInitSpec<f64>,
    pub fps_opts: FpsOptions<f64>,
    pub absorb_initial: bool,
    pub estimate0: ModelEstimate<f64>,
    pub rls_opts: RlsOptions,
    pub recurse_on_projection: bool,
    pub steps: usize,
}

fn matrix(what: &str, rows: &[Vec<f64>], nr: usize, nc: usize) -> Result<DMatrix<f64>, SimError> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(SimError::Config(format!("{what} must be {nr}x{nc}")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn vector(what: &str, v: &[f64], n: usize) -> Result<DVector<f64>, SimError> {
    if v.len() != n {
        return Err(SimError::Config(format!(
            "{what} must have length {n}, got {}",
            v.len()
        )));
    }
    Ok(DVector::from_column_slice(v))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn bundled() -> Self {
        Self::from_toml(DEFAULT_TOML).expect("bundled scenario parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks mutual consistency and converts to library types.
    pub fn build(&self) -> Result<Scenario, SimError> {
        let d = self.dims;
        let dims = FirDims::new(d.n_u, d.n_y, d.m)?;
        let (n_u, n_y, n) = (d.n_u, d.n_y, dims.regressor_len());

        let true_model = FirModel::new(dims, matrix("plant.true_model", &self.plant.true_model, n_y, n)?)?;
        let phi0 = Regressor::new(
            dims,
            vector("plant.initial_regressor", &self.plant.initial_regressor, n)?,
        )?;

        let c = &self.controller;
        let nc = c.c_mat.len();
        let mut mpc = MpcConfig::new(
            dims,
            c.horizon,
            matrix("controller.q_weight", &c.q_weight, n_y, n_y)?,
            matrix("controller.s_weight", &c.s_weight, n_u, n_u)?,
            matrix("controller.c_mat", &c.c_mat, nc, n_u)?,
            vector("controller.g_vec", &c.g_vec, nc)?,
            c.mode.into(),
        )?;
        mpc.cone_rows = c.cone_rows;

        let chance = ChanceSpec::new(
            vector("chance.e_row", &self.chance.e_row, n_y)?,
            self.chance.p,
            self.chance.epsilon,
        )?;

        let dist = &self.disturbance;
        let w_bar = vector("disturbance.bound", &dist.bound, n_y)?;
        if w_bar.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(SimError::Config(
                "disturbance.bound must be finite and non-negative".into(),
            ));
        }
        let sigma_w2 = matrix("disturbance.variance", &dist.variance, n_y, n_y)?;
        let sigma = match (dist.family, &dist.sigma) {
            (Family::TruncatedGaussian, Some(s)) => {
                let s = vector("disturbance.sigma", s, n_y)?;
                if s.iter().any(|&v| !(v > 0.0)) {
                    return Err(SimError::Config("disturbance.sigma must be positive".into()));
                }
                s
            }
            (Family::TruncatedGaussian, None) => {
                return Err(SimError::Config("truncated-gaussian needs disturbance.sigma".into()))
            }
            (Family::Uniform, Some(_)) => {
                return Err(SimError::Config(
                    "disturbance.sigma only applies to truncated-gaussian".into(),
                ))
            }
            (Family::Uniform, None) => DVector::zeros(n_y),
        };
        let gamma = build_gamma(&chance, &sigma_w2, dims)?;

        let f = &self.fps;
        let fps_init = FpsInitSpec {
            magnitude: f.magnitude,
            decay: f.decay,
        };
        let g = &self.geometry;
        let fps_opts = FpsOptions {
            geometry: GeometryTolerances {
                rank: g.rank_tol,
                feasibility: g.feasibility_tol,
                redundancy: g.redundancy_tol,
            },
            max_rows: f.max_rows,
        };

        let e = &self.estimator;
        let np = dims.param_len();
        let estimate0 = ModelEstimate::new(
            dims,
            vector("estimator.mean", &e.mean, np)?,
            matrix("estimator.covariance", &e.covariance, np, np)?,
            sigma_w2.clone(),
        )?;

        Ok(Scenario {
            raw: self.clone(),
            dims,
            true_model,
            phi0,
            mpc,
            chance,
            gamma,
            w_bar,
            sigma_w2,
            family: dist.family,
            sigma,
            fps_init,
            fps_opts,
            absorb_initial: f.absorb_initial_measurement,
            estimate0,
            rls_opts: RlsOptions { joseph: e.joseph },
            recurse_on_projection: e.recurse_on_projection,
            steps: self.run.steps,
        })
    }
}

impl Scenario {
    pub fn geometry(&self) -> &GeometryTolerances<f64> {
        &self.fps_opts.geometry
    }

    pub fn with_mode(&self, mode: Mode) -> Scenario {
        let mut s = self.clone();
        s.mpc.mode = mode.into();
        s.raw.controller.mode = mode;
        s
    }

    pub fn mode(&self) -> Mode {
        match self.mpc.mode {
            ControllerMode::Stochastic => Mode::Stochastic,
            ControllerMode::Robust => Mode::Robust,
        }
    }
}
