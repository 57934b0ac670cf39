//! Receding-horizon program over the input sequence `U = [u(t); ..; u(t+N-1)]`.
//!
//! Predicted regressors follow `phi(k+1) = W phi(k) + Z u(k)`, so every
//! `phi(t+k)` is affine in `U`. The cost sums `y'Qy + u'Su` along the
//! nominal prediction, with the measured `y(t)` entering as a constant and
//! one extra output term at `t+N`. The output constraint is imposed at every
//! vertex of the feasible parameter set for `k = 1..N`, and the last
//! regressor must be a steady state of the shift dynamics.

use nalgebra::{DMatrix, DVector};

use crate::chance::{AppendedCovariance, ChanceSpec};
use crate::error::{check_len, Error, Result};
use crate::fir::{build_shift_operators, FirDims, FirModel, Regressor};
use crate::scalar::Real;
use crate::solver::{solve_qp_soc, ConeRow, ConicProgram, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    /// Chance rows with the distributionally robust tightening, nominal
    /// model from the estimator.
    Stochastic,
    /// Hard output rows absorbing the worst-case disturbance, nominal model
    /// at the Chebyshev center of the feasible set.
    Robust,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig<T: Real> {
    pub dims: FirDims,
    pub horizon: usize,
    pub q_weight: DMatrix<T>,
    pub s_weight: DMatrix<T>,
    pub c_mat: DMatrix<T>,
    pub g_vec: DVector<T>,
    pub mode: ControllerMode,
    /// Pose chance rows as second-order-cone rows instead of the equivalent
    /// shifted linear rows.
    pub cone_rows: bool,
}

impl<T: Real> MpcConfig<T> {
    pub fn new(
        dims: FirDims,
        horizon: usize,
        q_weight: DMatrix<T>,
        s_weight: DMatrix<T>,
        c_mat: DMatrix<T>,
        g_vec: DVector<T>,
        mode: ControllerMode,
    ) -> Result<Self> {
        let cfg = Self {
            dims,
            horizon,
            q_weight,
            s_weight,
            c_mat,
            g_vec,
            mode,
            cone_rows: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (n_u, n_y) = (self.dims.n_u(), self.dims.n_y());
        if self.horizon <= self.dims.m() {
            return Err(Error::InvalidArgument(format!(
                "horizon {} must exceed the regressor length {}",
                self.horizon,
                self.dims.m()
            )));
        }
        check_len("output weight rows", n_y, self.q_weight.nrows())?;
        check_len("output weight columns", n_y, self.q_weight.ncols())?;
        check_len("input weight rows", n_u, self.s_weight.nrows())?;
        check_len("input weight columns", n_u, self.s_weight.ncols())?;
        check_len("input constraint columns", n_u, self.c_mat.ncols())?;
        check_len("input constraint rhs", self.c_mat.nrows(), self.g_vec.len())?;
        let sym = |m: &DMatrix<T>| (m - m.transpose()).amax() <= T::lit(1e-12) * T::one().max(m.amax());
        if !sym(&self.q_weight) || !sym(&self.s_weight) {
            return Err(Error::InvalidArgument("weights must be symmetric".into()));
        }
        let q_min = self
            .q_weight
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(T::lit(f64::INFINITY), |a, &b| a.min(b));
        if q_min < T::zero() {
            return Err(Error::InvalidArgument("output weight must be PSD".into()));
        }
        if self.s_weight.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument("input weight must be positive definite".into()));
        }
        Ok(())
    }

    pub fn decision_len(&self) -> usize {
        self.horizon * self.dims.n_u()
    }
}

/// `phi(t+k) = offsets[k-1] + maps[k-1] * U` for `k = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorPrediction<T: Real> {
    pub offsets: Vec<DVector<T>>,
    pub maps: Vec<DMatrix<T>>,
}

impl<T: Real> RegressorPrediction<T> {
    pub fn new(cfg: &MpcConfig<T>, phi_t: &Regressor<T>) -> Result<Self> {
        let dims = cfg.dims;
        check_len("regressor length", dims.regressor_len(), phi_t.len())?;
        let ops = build_shift_operators::<T>(dims);
        let n_dec = cfg.decision_len();
        let n_u = dims.n_u();
        let mut offsets = Vec::with_capacity(cfg.horizon);
        let mut maps = Vec::with_capacity(cfg.horizon);
        let mut c = phi_t.as_vector().clone();
        let mut b = DMatrix::zeros(dims.regressor_len(), n_dec);
        for k in 0..cfg.horizon {
            c = &ops.w_op * c;
            b = &ops.w_op * b;
            let mut block = b.columns_mut(k * n_u, n_u);
            block += &ops.z_op;
            offsets.push(c.clone());
            maps.push(b.clone());
        }
        Ok(Self { offsets, maps })
    }

    pub fn regressor_at(&self, k: usize, u: &DVector<T>) -> DVector<T> {
        &self.offsets[k] + &self.maps[k] * u
    }
}

/// Assembled program plus the prediction maps needed to interpret its
/// decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcProgram<T: Real> {
    pub program: ConicProgram<T>,
    pub prediction: RegressorPrediction<T>,
    pub dims: FirDims,
    pub horizon: usize,
}

impl<T: Real> MpcProgram<T> {
    /// Worst constraint violation of an input sequence (zero when feasible).
    pub fn max_violation(&self, u_seq: &[DVector<T>]) -> Result<T> {
        Ok(self.program.max_violation(&self.stack(u_seq)?))
    }

    /// Cost of an input sequence, the measured-output term included.
    pub fn objective(&self, u_seq: &[DVector<T>]) -> Result<T> {
        Ok(self.program.objective(&self.stack(u_seq)?))
    }

    fn stack(&self, u_seq: &[DVector<T>]) -> Result<DVector<T>> {
        check_len("input sequence length", self.horizon, u_seq.len())?;
        let n_u = self.dims.n_u();
        let mut x = DVector::zeros(self.horizon * n_u);
        for (k, u) in u_seq.iter().enumerate() {
            check_len("input length", n_u, u.len())?;
            x.rows_mut(k * n_u, n_u).copy_from(u);
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution<T: Real> {
    pub u_seq: Vec<DVector<T>>,
    pub status: SolveStatus,
    pub objective: T,
    /// `phi(t+1|t) .. phi(t+N|t)` under `u_seq`.
    pub predicted_regressors: Vec<Regressor<T>>,
    pub iterations: usize,
}

impl<T: Real> MpcSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Chance-constrained program with nominal model `nominal` (the estimator
/// mean) and one chance row per vertex and step.
#[allow(clippy::too_many_arguments)]
pub fn assemble_stochastic<T: Real>(
    phi_t: &Regressor<T>,
    y_t: &DVector<T>,
    nominal: &FirModel<T>,
    vertices: &[FirModel<T>],
    cc: &ChanceSpec<T>,
    gamma: &AppendedCovariance<T>,
    cfg: &MpcConfig<T>,
) -> Result<MpcProgram<T>> {
    check_len("constraint row", cfg.dims.n_y(), cc.e_row().len())?;
    check_len("appended covariance", cfg.dims.regressor_len(), gamma.regressor_len())?;
    let mut prog = base_program(phi_t, y_t, nominal, cfg)?;
    let tightening = gamma.constant_tightening(cc);
    let pred = &prog.prediction;
    let mut lin_rows = Vec::new();
    let mut cones = Vec::new();
    let factor = gamma.factor();
    let n = cfg.dims.regressor_len();
    let kappa = cc.kappa();
    for f in vertices {
        let normal = cc.project_model(f);
        for k in 0..cfg.horizon {
            let row = pred.maps[k].tr_mul(&normal);
            let offset = normal.dot(&pred.offsets[k]);
            match tightening {
                Some(tau) if !cfg.cone_rows => {
                    lin_rows.push((row, cc.p() - tau - offset));
                }
                _ => {
                    let l_phi = factor.columns(0, n);
                    let a = l_phi * &pred.maps[k] * kappa;
                    let consts = factor.column(n) + factor.column(n + 1);
                    let b = (l_phi * &pred.offsets[k] + consts) * kappa;
                    cones.push(ConeRow {
                        a,
                        b,
                        c: -row,
                        d: cc.p() - offset,
                    });
                }
            }
        }
    }
    append_rows(&mut prog.program, &lin_rows);
    prog.program.cones = cones;
    Ok(prog)
}

/// Hard-constrained program: `E f phi + |E| w_bar <= p` at every vertex and
/// step, nominal model `center`.
pub fn assemble_robust<T: Real>(
    phi_t: &Regressor<T>,
    y_t: &DVector<T>,
    center: &FirModel<T>,
    vertices: &[FirModel<T>],
    cc: &ChanceSpec<T>,
    w_bar: &DVector<T>,
    cfg: &MpcConfig<T>,
) -> Result<MpcProgram<T>> {
    check_len("constraint row", cfg.dims.n_y(), cc.e_row().len())?;
    check_len("disturbance bound", cfg.dims.n_y(), w_bar.len())?;
    let mut prog = base_program(phi_t, y_t, center, cfg)?;
    let margin = cc.e_row().abs().dot(w_bar);
    let pred = &prog.prediction;
    let mut rows = Vec::new();
    for f in vertices {
        let normal = cc.project_model(f);
        for k in 0..cfg.horizon {
            rows.push((
                pred.maps[k].tr_mul(&normal),
                cc.p() - margin - normal.dot(&pred.offsets[k]),
            ));
        }
    }
    append_rows(&mut prog.program, &rows);
    Ok(prog)
}

fn append_rows<T: Real>(prog: &mut ConicProgram<T>, rows: &[(DVector<T>, T)]) {
    if rows.is_empty() {
        return;
    }
    let n = prog.dim();
    let k0 = prog.g.nrows();
    let mut g = DMatrix::zeros(k0 + rows.len(), n);
    g.rows_mut(0, k0).copy_from(&prog.g);
    let mut h = DVector::zeros(k0 + rows.len());
    h.rows_mut(0, k0).copy_from(&prog.h);
    for (i, (row, rhs)) in rows.iter().enumerate() {
        g.row_mut(k0 + i).copy_from(&row.transpose());
        h[k0 + i] = *rhs;
    }
    prog.g = g;
    prog.h = h;
}

/// Cost, input rows and the terminal steady-state equalities.
fn base_program<T: Real>(
    phi_t: &Regressor<T>,
    y_t: &DVector<T>,
    nominal: &FirModel<T>,
    cfg: &MpcConfig<T>,
) -> Result<MpcProgram<T>> {
    cfg.validate()?;
    let dims = cfg.dims;
    check_len("output length", dims.n_y(), y_t.len())?;
    check_len("nominal rows", dims.n_y(), nominal.matrix().nrows())?;
    check_len("nominal columns", dims.regressor_len(), nominal.matrix().ncols())?;
    let pred = RegressorPrediction::new(cfg, phi_t)?;
    let (n_u, n_dec, n) = (dims.n_u(), cfg.decision_len(), dims.regressor_len());
    let two = T::lit(2.0);
    let mu = nominal.matrix();
    let qmu = &cfg.q_weight * mu;
    let output_hess = mu.transpose() * &qmu;

    let mut prog = ConicProgram::new(n_dec);
    prog.constant = y_t.dot(&(&cfg.q_weight * y_t));
    for k in 0..cfg.horizon {
        let b = &pred.maps[k];
        let c = &pred.offsets[k];
        let hb = &output_hess * b;
        prog.p += b.transpose() * &hb * two;
        prog.q += hb.tr_mul(c) * two;
        prog.constant += c.dot(&(&output_hess * c));
        let mut block = prog.p.view_mut((k * n_u, k * n_u), (n_u, n_u));
        block += &cfg.s_weight * two;
    }
    prog.p = (&prog.p + prog.p.transpose()) * T::lit(0.5);

    let nc = cfg.c_mat.nrows();
    let mut g = DMatrix::zeros(nc * cfg.horizon, n_dec);
    let mut h = DVector::zeros(nc * cfg.horizon);
    for k in 0..cfg.horizon {
        g.view_mut((k * nc, k * n_u), (nc, n_u)).copy_from(&cfg.c_mat);
        h.rows_mut(k * nc, nc).copy_from(&cfg.g_vec);
    }
    prog.g = g;
    prog.h = h;

    // (I - W) phi(t+N) - Z u(t+N-1) = 0
    let ops = build_shift_operators::<T>(dims);
    let i_w = DMatrix::identity(n, n) - &ops.w_op;
    let last = cfg.horizon - 1;
    let mut a = &i_w * &pred.maps[last];
    let mut block = a.columns_mut(last * n_u, n_u);
    block -= &ops.z_op;
    prog.a_eq = a;
    prog.b_eq = -(&i_w * &pred.offsets[last]);

    Ok(MpcProgram {
        program: prog,
        prediction: pred,
        dims,
        horizon: cfg.horizon,
    })
}

pub fn solve<T: Real>(prog: &MpcProgram<T>) -> Result<MpcSolution<T>> {
    let rep = solve_qp_soc(&prog.program)?;
    let status = match rep.status {
        SolveStatus::Unbounded => SolveStatus::SolverFailure,
        s => s,
    };
    if status != SolveStatus::Optimal {
        return Ok(MpcSolution {
            u_seq: Vec::new(),
            status,
            objective: T::lit(f64::NAN),
            predicted_regressors: Vec::new(),
            iterations: rep.iterations,
        });
    }
    let n_u = prog.dims.n_u();
    let u_seq: Vec<DVector<T>> = (0..prog.horizon)
        .map(|k| rep.x.rows(k * n_u, n_u).into_owned())
        .collect();
    let predicted_regressors = (0..prog.horizon)
        .map(|k| Regressor::new(prog.dims, prog.prediction.regressor_at(k, &rep.x)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MpcSolution {
        objective: prog.program.objective(&rep.x),
        u_seq,
        status,
        predicted_regressors,
        iterations: rep.iterations,
    })
}

/// `u*(t|t)`, the input applied to the plant.
pub fn first_input<T: Real>(sol: &MpcSolution<T>) -> Result<DVector<T>> {
    if !sol.is_optimal() || sol.u_seq.is_empty() {
        return Err(Error::NotOptimal(format!("no input to apply: {}", sol.status)));
    }
    Ok(sol.u_seq[0].clone())
}

/// Previous optimal sequence advanced by one step, last input repeated.
pub fn shifted_candidate<T: Real>(prev: &MpcSolution<T>) -> Result<Vec<DVector<T>>> {
    if !prev.is_optimal() || prev.u_seq.is_empty() {
        return Err(Error::NotOptimal(format!("cannot shift: {}", prev.status)));
    }
    let mut out: Vec<DVector<T>> = prev.u_seq[1..].to_vec();
    out.push(prev.u_seq[prev.u_seq.len() - 1].clone());
    Ok(out)
}
