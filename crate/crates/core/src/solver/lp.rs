//! Two-phase tableau simplex over free variables.
//!
//! Free variables are split as `x = x+ - x-`, every row gets a slack, and
//! rows with negative right-hand side are negated and given an artificial
//! variable. Entering and leaving choices follow Bland's rule with ties
//! broken by the lowest variable index, so the method cannot cycle and is
//! reproducible run to run.

use nalgebra::{DMatrix, DVector};

use super::{SolveReport, SolveStatus};
use crate::error::{check_len, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct LpOptions<T> {
    /// Smallest admissible pivot magnitude.
    pub pivot_tol: T,
    /// Reduced-cost threshold for optimality and phase-one infeasibility.
    pub opt_tol: T,
    pub max_pivots: usize,
}

impl<T: Real> Default for LpOptions<T> {
    fn default() -> Self {
        Self {
            pivot_tol: T::eps().sqrt() * T::lit(1e-1),
            opt_tol: T::eps().sqrt() * T::lit(1e-1),
            max_pivots: 50_000,
        }
    }
}

/// `min c'x  s.t.  G x <= h` with `x` free.
pub fn solve_lp<T: Real>(c: &DVector<T>, g: &DMatrix<T>, h: &DVector<T>) -> Result<SolveReport<T>> {
    solve_lp_with(c, g, h, &LpOptions::default())
}

pub fn solve_lp_with<T: Real>(
    c: &DVector<T>,
    g: &DMatrix<T>,
    h: &DVector<T>,
    opts: &LpOptions<T>,
) -> Result<SolveReport<T>> {
    check_len("LP constraint columns", c.len(), g.ncols())?;
    check_len("LP right-hand side", g.nrows(), h.len())?;
    let mut tab = Tableau::new(g, h);
    Ok(tab.run(c, opts))
}

struct Tableau<T: Real> {
    n: usize,
    m: usize,
    /// Number of structural plus slack columns; artificials follow.
    n_core: usize,
    ncol: usize,
    /// Row-major `m x (ncol + 1)`; the last column is the right-hand side.
    data: Vec<T>,
    basis: Vec<usize>,
    g: DMatrix<T>,
    h: DVector<T>,
}

impl<T: Real> Tableau<T> {
    fn new(g: &DMatrix<T>, h: &DVector<T>) -> Self {
        let (m, n) = g.shape();
        let n_core = 2 * n + m;
        let n_art = h.iter().filter(|&&v| v < T::zero()).count();
        let ncol = n_core + n_art;
        let width = ncol + 1;
        let mut data = vec![T::zero(); m * width];
        let mut basis = Vec::with_capacity(m);
        let mut next_art = n_core;
        for i in 0..m {
            let flip = h[i] < T::zero();
            let sign = if flip { -T::one() } else { T::one() };
            let row = &mut data[i * width..(i + 1) * width];
            for j in 0..n {
                row[j] = sign * g[(i, j)];
                row[n + j] = -sign * g[(i, j)];
            }
            row[2 * n + i] = sign;
            row[ncol] = sign * h[i];
            if flip {
                row[next_art] = T::one();
                basis.push(next_art);
                next_art += 1;
            } else {
                basis.push(2 * n + i);
            }
        }
        Self {
            n,
            m,
            n_core,
            ncol,
            data,
            basis,
            g: g.clone(),
            h: h.clone(),
        }
    }

    fn width(&self) -> usize {
        self.ncol + 1
    }

    fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> T {
        self.at(i, self.ncol)
    }

    /// Reduced costs and objective value for `cost` under the current basis.
    fn reduced_costs(&self, cost: &[T]) -> (Vec<T>, T) {
        let mut r = cost.to_vec();
        let mut value = T::zero();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            for (j, rj) in r.iter_mut().enumerate().take(self.ncol) {
                *rj -= cb * self.at(i, j);
            }
            value += cb * self.rhs(i);
        }
        (r, value)
    }

    fn pivot(&mut self, row: usize, col: usize, r: &mut [T], value: &mut T) {
        let w = self.width();
        let inv = T::one() / self.data[row * w + col];
        for j in 0..w {
            self.data[row * w + j] *= inv;
        }
        self.data[row * w + col] = T::one();
        let pivot_row: Vec<T> = self.data[row * w..(row + 1) * w].to_vec();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.data[i * w + col];
            if f == T::zero() {
                continue;
            }
            for (j, &pj) in pivot_row.iter().enumerate().take(w) {
                self.data[i * w + j] -= f * pj;
            }
            self.data[i * w + col] = T::zero();
        }
        let f = r[col];
        if f != T::zero() {
            for j in 0..self.ncol {
                r[j] -= f * pivot_row[j];
            }
            r[col] = T::zero();
            *value += f * pivot_row[self.ncol];
        }
        self.basis[row] = col;
    }

    /// Bland's rule iterations. Returns `Ok(())` at optimality, `Err(col)`
    /// with the unbounded entering column, or `None` via pivot cap.
    fn iterate(
        &mut self,
        r: &mut [T],
        value: &mut T,
        allowed: usize,
        opts: &LpOptions<T>,
        pivots: &mut usize,
    ) -> Option<Result<(), usize>> {
        loop {
            let Some(enter) = (0..allowed).find(|&j| r[j] < -opts.opt_tol) else {
                return Some(Ok(()));
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m {
                let a = self.at(i, enter);
                if a <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.rhs(i).max(T::zero()) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= opts.pivot_tol * (T::one() + best_ratio.abs());
                        if ratio < best_ratio && !tie || tie && self.basis[i] < self.basis[best] {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Some(Err(enter));
            };
            if *pivots >= opts.max_pivots {
                return None;
            }
            *pivots += 1;
            self.pivot(row, enter, r, value);
        }
    }

    fn primal(&self) -> DVector<T> {
        let mut z = vec![T::zero(); self.ncol];
        for i in 0..self.m {
            z[self.basis[i]] = self.rhs(i);
        }
        DVector::from_fn(self.n, |j, _| z[j] - z[self.n + j])
    }

    fn run(&mut self, c: &DVector<T>, opts: &LpOptions<T>) -> SolveReport<T> {
        let (n, m) = (self.n, self.m);
        let mut pivots = 0;

        if self.ncol > self.n_core {
            let mut cost = vec![T::zero(); self.ncol];
            for v in cost.iter_mut().skip(self.n_core) {
                *v = T::one();
            }
            let (mut r, mut value) = self.reduced_costs(&cost);
            match self.iterate(&mut r, &mut value, self.ncol, opts, &mut pivots) {
                None => return SolveReport::failed(SolveStatus::SolverFailure, n, pivots),
                // Phase one is bounded below by zero.
                Some(Err(_)) => return SolveReport::failed(SolveStatus::SolverFailure, n, pivots),
                Some(Ok(())) => {}
            }
            let scale = T::one() + crate::scalar::max_abs(self.h.iter().copied());
            if value > opts.opt_tol * scale {
                // Slack reduced costs form a Farkas multiplier.
                let lambda = DVector::from_fn(m, |i, _| r[2 * n + i].max(T::zero()));
                let mut rep = SolveReport::failed(SolveStatus::Infeasible, n, pivots);
                rep.certificate = Some(lambda);
                return rep;
            }
            self.drive_out_artificials(opts);
        }

        let mut cost = vec![T::zero(); self.ncol];
        for j in 0..n {
            cost[j] = c[j];
            cost[n + j] = -c[j];
        }
        let (mut r, mut value) = self.reduced_costs(&cost);
        match self.iterate(&mut r, &mut value, self.n_core, opts, &mut pivots) {
            None => SolveReport::failed(SolveStatus::SolverFailure, n, pivots),
            Some(Err(enter)) => {
                let mut dz = vec![T::zero(); self.ncol];
                dz[enter] = T::one();
                for i in 0..m {
                    dz[self.basis[i]] = -self.at(i, enter);
                }
                let ray = DVector::from_fn(n, |j, _| dz[j] - dz[n + j]);
                let mut rep = SolveReport::failed(SolveStatus::Unbounded, n, pivots);
                rep.x = self.primal();
                rep.certificate = Some(ray);
                rep
            }
            Some(Ok(())) => {
                let x = self.primal();
                let lambda = DVector::from_fn(m, |i, _| r[2 * n + i].max(T::zero()));
                let objective = c.dot(&x);
                let dual_objective = -self.h.dot(&lambda);
                let primal_residual = if m == 0 {
                    T::zero()
                } else {
                    (&self.g * &x - &self.h).iter().fold(T::zero(), |a, &v| a.max(v))
                };
                let dual_residual = (c + self.g.transpose() * &lambda).amax();
                SolveReport {
                    status: SolveStatus::Optimal,
                    x,
                    objective,
                    dual_objective,
                    primal_residual,
                    dual_residual,
                    iterations: pivots,
                    ineq_dual: lambda,
                    eq_dual: DVector::zeros(0),
                    certificate: None,
                }
            }
        }
    }

    /// Pivot zero-level artificials out of the basis where possible. Rows
    /// where that fails are linearly dependent and keep the artificial,
    /// which can then never move since artificials may not re-enter.
    fn drive_out_artificials(&mut self, opts: &LpOptions<T>) {
        let mut dummy_r = vec![T::zero(); self.ncol];
        let mut dummy_v = T::zero();
        for i in 0..self.m {
            if self.basis[i] < self.n_core {
                continue;
            }
            if let Some(j) = (0..self.n_core).find(|&j| self.at(i, j).abs() > opts.pivot_tol) {
                self.pivot(i, j, &mut dummy_r, &mut dummy_v);
            }
        }
    }
}
