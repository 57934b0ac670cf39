//! Dense solvers for the three problem classes the controller needs.
//!
//! * [`solve_lp`]: `min c'x  s.t.  G x <= h`, two-phase tableau simplex with
//!   Bland's rule. Reports unboundedness and Farkas certificates.
//! * [`solve_qp`]: `min 1/2 x'Px + q'x  s.t.  G x <= h, A x = b`.
//! * [`solve_qp_soc`]: the same plus second-order cone rows
//!   `||A_c x + b_c||_2 <= c_c'x + d_c`.
//!
//! The two QP entry points share a primal-dual interior-point method with
//! Nesterov-Todd scaling and Mehrotra correction. Everything is dense and
//! deterministic: identical inputs give bitwise identical outputs.

mod cone;
mod ipm;
mod lp;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};
use crate::scalar::Real;

pub use ipm::IpmOptions;
pub use lp::{solve_lp, solve_lp_with, LpOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Numerical breakdown or iteration cap.
    SolverFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::SolverFailure => "solver_failure",
        };
        f.write_str(s)
    }
}

/// Outcome of a solve.
///
/// `certificate` carries a Farkas multiplier `lambda >= 0` with
/// `G' lambda = 0, h' lambda < 0` for infeasible linear programs, the cone
/// dual of the phase-one problem for infeasible conic programs, and a primal
/// ray for unbounded LPs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T: Real> {
    pub status: SolveStatus,
    pub x: DVector<T>,
    pub objective: T,
    pub dual_objective: T,
    pub primal_residual: T,
    pub dual_residual: T,
    pub iterations: usize,
    /// Multipliers of the inequality rows followed by the cone rows.
    pub ineq_dual: DVector<T>,
    pub eq_dual: DVector<T>,
    pub certificate: Option<DVector<T>>,
}

impl<T: Real> SolveReport<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub(crate) fn failed(status: SolveStatus, n: usize, iterations: usize) -> Self {
        let nan = T::lit(f64::NAN);
        Self {
            status,
            x: DVector::from_element(n, nan),
            objective: nan,
            dual_objective: nan,
            primal_residual: nan,
            dual_residual: nan,
            iterations,
            ineq_dual: DVector::zeros(0),
            eq_dual: DVector::zeros(0),
            certificate: None,
        }
    }
}

/// `||a x + b||_2 <= c'x + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRow<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub c: DVector<T>,
    pub d: T,
}

impl<T: Real> ConeRow<T> {
    /// `c'x + d - ||a x + b||`; non-negative iff the row holds.
    pub fn slack(&self, x: &DVector<T>) -> T {
        self.c.dot(x) + self.d - (&self.a * x + &self.b).norm()
    }
}

/// Canonical convex program
///
/// ```text
/// minimize    1/2 x'Px + q'x + constant
/// subject to  G x <= h
///             A x  = b
///             ||A_c x + b_c|| <= c_c'x + d_c   for every cone row
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram<T: Real> {
    pub p: DMatrix<T>,
    pub q: DVector<T>,
    pub constant: T,
    pub g: DMatrix<T>,
    pub h: DVector<T>,
    pub a_eq: DMatrix<T>,
    pub b_eq: DVector<T>,
    pub cones: Vec<ConeRow<T>>,
}

impl<T: Real> ConicProgram<T> {
    /// Unconstrained program with zero cost in `n` variables.
    pub fn new(n: usize) -> Self {
        Self {
            p: DMatrix::zeros(n, n),
            q: DVector::zeros(n),
            constant: T::zero(),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            cones: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_len("cost matrix rows", n, self.p.nrows())?;
        check_len("cost matrix columns", n, self.p.ncols())?;
        check_len("inequality columns", n, self.g.ncols())?;
        check_len("inequality rhs", self.g.nrows(), self.h.len())?;
        check_len("equality columns", n, self.a_eq.ncols())?;
        check_len("equality rhs", self.a_eq.nrows(), self.b_eq.len())?;
        for cone in &self.cones {
            check_len("cone map columns", n, cone.a.ncols())?;
            check_len("cone offset", cone.a.nrows(), cone.b.len())?;
            check_len("cone linear term", n, cone.c.len())?;
        }
        Ok(())
    }

    pub fn push_inequality(&mut self, row: &[T], rhs: T) {
        let n = self.dim();
        debug_assert_eq!(row.len(), n);
        let k = self.g.nrows();
        self.g = std::mem::replace(&mut self.g, DMatrix::zeros(0, 0)).insert_row(k, T::zero());
        for (j, &v) in row.iter().enumerate() {
            self.g[(k, j)] = v;
        }
        self.h = std::mem::replace(&mut self.h, DVector::zeros(0)).push(rhs);
    }

    pub fn push_equality(&mut self, row: &[T], rhs: T) {
        let k = self.a_eq.nrows();
        self.a_eq = std::mem::replace(&mut self.a_eq, DMatrix::zeros(0, 0)).insert_row(k, T::zero());
        for (j, &v) in row.iter().enumerate() {
            self.a_eq[(k, j)] = v;
        }
        self.b_eq = std::mem::replace(&mut self.b_eq, DVector::zeros(0)).push(rhs);
    }

    /// Cost at `x`, constant included.
    pub fn objective(&self, x: &DVector<T>) -> T {
        (x.transpose() * &self.p * x)[(0, 0)] * T::lit(0.5) + self.q.dot(x) + self.constant
    }

    /// Largest violation of any constraint at `x` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<T>) -> T {
        let mut worst = T::zero();
        if self.g.nrows() > 0 {
            let r = &self.g * x - &self.h;
            worst = r.iter().fold(worst, |m, &v| m.max(v));
        }
        if self.a_eq.nrows() > 0 {
            let r = &self.a_eq * x - &self.b_eq;
            worst = r.iter().fold(worst, |m, &v| m.max(v.abs()));
        }
        for cone in &self.cones {
            worst = worst.max(-cone.slack(x));
        }
        worst
    }
}

/// `min 1/2 x'Px + q'x  s.t.  G x <= h, A x = b`.
pub fn solve_qp<T: Real>(
    p: &DMatrix<T>,
    q: &DVector<T>,
    g: &DMatrix<T>,
    h: &DVector<T>,
    a: &DMatrix<T>,
    b: &DVector<T>,
) -> Result<SolveReport<T>> {
    let prog = ConicProgram {
        p: p.clone(),
        q: q.clone(),
        constant: T::zero(),
        g: g.clone(),
        h: h.clone(),
        a_eq: a.clone(),
        b_eq: b.clone(),
        cones: Vec::new(),
    };
    solve_qp_soc(&prog)
}

pub fn solve_qp_soc<T: Real>(prog: &ConicProgram<T>) -> Result<SolveReport<T>> {
    solve_qp_soc_with(prog, &IpmOptions::default())
}

pub fn solve_qp_soc_with<T: Real>(prog: &ConicProgram<T>, opts: &IpmOptions<T>) -> Result<SolveReport<T>> {
    prog.validate()?;
    Ok(ipm::solve(prog, opts))
}
