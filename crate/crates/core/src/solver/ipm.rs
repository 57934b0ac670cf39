//! Infeasible-start primal-dual interior-point method for
//!
//! ```text
//! minimize 1/2 x'Px + q'x   s.t.  G x + s = h,  A x = b,  s in K
//! ```
//!
//! with `K` a product of the non-negative orthant and second-order cones.
//! Search directions come from the Nesterov-Todd scaled Newton system with a
//! Mehrotra predictor-corrector; the reduced KKT system is factorized densely
//! by LU.

use nalgebra::{DMatrix, DVector};

use super::cone::{self, ConeDims, Scaling};
use super::lp::solve_lp;
use super::{ConicProgram, SolveReport, SolveStatus};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions<T> {
    /// Relative primal and dual residual target.
    pub feas_tol: T,
    pub abs_gap_tol: T,
    pub rel_gap_tol: T,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: T,
    /// Absolute residual bound an `Optimal` report must meet.
    pub accept_tol: T,
    /// Looser targets accepted if the iteration stalls.
    pub stall_feas_tol: T,
    pub stall_gap_tol: T,
}

impl<T: Real> Default for IpmOptions<T> {
    fn default() -> Self {
        let eps = T::eps();
        let tight = (eps * T::lit(1e2)).max(T::lit(1e-10));
        Self {
            feas_tol: tight,
            abs_gap_tol: tight,
            rel_gap_tol: tight,
            max_iter: 200,
            step_fraction: T::lit(0.99),
            accept_tol: (eps * T::lit(1e4)).max(T::lit(1e-6)),
            stall_feas_tol: (eps * T::lit(1e3)).max(T::lit(1e-8)),
            stall_gap_tol: (eps * T::lit(1e3)).max(T::lit(1e-8)),
        }
    }
}

/// Program in solver form with the cone rows flattened into `G, h`.
struct Standard<T: Real> {
    p: DMatrix<T>,
    q: DVector<T>,
    a: DMatrix<T>,
    b: DVector<T>,
    g: DMatrix<T>,
    h: DVector<T>,
    dims: ConeDims,
    /// Original index of every kept equality row.
    eq_rows: Vec<usize>,
}

impl<T: Real> Standard<T> {
    /// `None` when an all-zero equality row has a nonzero right-hand side.
    fn new(prog: &ConicProgram<T>, zero_tol: T) -> Option<Self> {
        let n = prog.dim();
        let lin = prog.g.nrows();
        let cone_rows: usize = prog.cones.iter().map(|c| c.a.nrows() + 1).sum();
        let mut g = DMatrix::zeros(lin + cone_rows, n);
        let mut h = DVector::zeros(lin + cone_rows);
        g.rows_mut(0, lin).copy_from(&prog.g);
        h.rows_mut(0, lin).copy_from(&prog.h);
        let mut soc = Vec::with_capacity(prog.cones.len());
        let mut off = lin;
        for cone in &prog.cones {
            let k = cone.a.nrows();
            // s = h - G x = [c'x + d; A x + b]
            g.row_mut(off).copy_from(&(-cone.c.transpose()));
            h[off] = cone.d;
            g.rows_mut(off + 1, k).copy_from(&(-&cone.a));
            h.rows_mut(off + 1, k).copy_from(&cone.b);
            soc.push(k + 1);
            off += k + 1;
        }

        let mut eq_rows = Vec::new();
        for i in 0..prog.a_eq.nrows() {
            let row_norm = prog.a_eq.row(i).amax();
            if row_norm <= zero_tol {
                if prog.b_eq[i].abs() > zero_tol {
                    return None;
                }
                continue;
            }
            eq_rows.push(i);
        }
        let a = DMatrix::from_fn(eq_rows.len(), n, |i, j| prog.a_eq[(eq_rows[i], j)]);
        let b = DVector::from_fn(eq_rows.len(), |i, _| prog.b_eq[eq_rows[i]]);
        Some(Self {
            p: prog.p.clone(),
            q: prog.q.clone(),
            a,
            b,
            g,
            h,
            dims: ConeDims { nonneg: lin, soc },
            eq_rows,
        })
    }
}

struct Kkt<'a, T: Real> {
    w: Option<&'a Scaling<T>>,
    ghat: DMatrix<T>,
    reduced: DMatrix<T>,
    lu: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a, T: Real> Kkt<'a, T> {
    /// Factor `[P + G'W^{-2}G, A'; A, 0]` with a small static
    /// regularization; refinement steps remove its bias.
    fn factor(std: &'a Standard<T>, w: Option<&'a Scaling<T>>) -> Option<Self> {
        let n = std.q.len();
        let pe = std.a.nrows();
        let ghat = match w {
            Some(w) => w.apply_inv_cols(&std.g),
            None => std.g.clone(),
        };
        let hmat = &std.p + ghat.transpose() * &ghat;
        let mut reduced = DMatrix::zeros(n + pe, n + pe);
        reduced.view_mut((0, 0), (n, n)).copy_from(&hmat);
        reduced.view_mut((n, 0), (pe, n)).copy_from(&std.a);
        reduced.view_mut((0, n), (n, pe)).copy_from(&std.a.transpose());
        let delta = T::eps() * T::lit(1e2);
        let mut regularized = reduced.clone();
        for i in 0..n {
            regularized[(i, i)] += delta;
        }
        for i in n..n + pe {
            regularized[(i, i)] -= delta;
        }
        let lu = regularized.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self { w, ghat, reduced, lu })
    }

    fn winv(&self, v: &DVector<T>) -> DVector<T> {
        match self.w {
            Some(w) => w.apply_inv(v),
            None => v.clone(),
        }
    }

    fn w_apply(&self, v: &DVector<T>) -> DVector<T> {
        match self.w {
            Some(w) => w.apply(v),
            None => v.clone(),
        }
    }

    fn solve_once(
        &self,
        rx: &DVector<T>,
        ry: &DVector<T>,
        rz: &DVector<T>,
    ) -> Option<(DVector<T>, DVector<T>, DVector<T>)> {
        let n = rx.len();
        let pe = ry.len();
        let winv_rz = self.winv(rz);
        let mut rhs = DVector::zeros(n + pe);
        rhs.rows_mut(0, n).copy_from(&(rx + self.ghat.transpose() * &winv_rz));
        rhs.rows_mut(n, pe).copy_from(ry);
        let mut sol = self.lu.solve(&rhs)?;
        let resid = &rhs - &self.reduced * &sol;
        sol += self.lu.solve(&resid)?;
        let dx = sol.rows(0, n).into_owned();
        let dy = sol.rows(n, pe).into_owned();
        let dz = self.winv(&(&self.ghat * &dx - winv_rz));
        Some((dx, dy, dz))
    }

    /// Solves `P dx + A'dy + G'dz = rx, A dx = ry, G dx - W'W dz = rz`,
    /// refining against the unreduced system.
    fn solve(
        &self,
        std: &Standard<T>,
        rx: &DVector<T>,
        ry: &DVector<T>,
        rz: &DVector<T>,
    ) -> Option<(DVector<T>, DVector<T>, DVector<T>)> {
        let (mut dx, mut dy, mut dz) = self.solve_once(rx, ry, rz)?;
        let scale = T::one().max(rx.amax()).max(ry.amax()).max(rz.amax());
        for _ in 0..3 {
            let ex = rx - (&std.p * &dx + std.a.transpose() * &dy + std.g.transpose() * &dz);
            let ey = ry - &std.a * &dx;
            let ez = rz - (&std.g * &dx - self.w_apply(&self.w_apply(&dz)));
            let err = ex.amax().max(ey.amax()).max(ez.amax());
            if err <= T::eps() * scale {
                break;
            }
            let (cx, cy, cz) = self.solve_once(&ex, &ey, &ez)?;
            dx += cx;
            dy += cy;
            dz += cz;
        }
        if dx.iter().chain(dy.iter()).chain(dz.iter()).all(|v| v.is_finite()) {
            Some((dx, dy, dz))
        } else {
            None
        }
    }
}

#[derive(Clone)]
struct Iterate<T: Real> {
    x: DVector<T>,
    y: DVector<T>,
    z: DVector<T>,
    s: DVector<T>,
    iterations: usize,
}

/// `(dx, dy, dz, ds)`.
type Direction<T> = (DVector<T>, DVector<T>, DVector<T>, DVector<T>);

enum Outcome<T: Real> {
    Converged(Iterate<T>),
    Failed(usize),
}

fn initial_point<T: Real>(std: &Standard<T>) -> Option<Iterate<T>> {
    let kkt = Kkt::factor(std, None)?;
    let (x, y, zt) = kkt.solve(std, &(-&std.q), &std.b, &std.h)?;
    let mut s = -&zt;
    let mut z = zt;
    let e = cone::identity::<T>(&std.dims);
    if std.dims.total() > 0 {
        let ts = cone::max_eig_deficit(&std.dims, &s);
        let nrms = s.norm();
        if ts >= -T::lit(1e-8) * T::one().max(nrms) {
            s += &e * (T::one() + ts);
        }
        let tz = cone::max_eig_deficit(&std.dims, &z);
        let nrmz = z.norm();
        if tz >= -T::lit(1e-8) * T::one().max(nrmz) {
            z += &e * (T::one() + tz);
        }
    }
    Some(Iterate {
        x,
        y,
        z,
        s,
        iterations: 0,
    })
}

fn run<T: Real>(std: &Standard<T>, opts: &IpmOptions<T>) -> Outcome<T> {
    let Some(mut it) = initial_point(std) else {
        return Outcome::Failed(0);
    };
    let dims = &std.dims;
    let degree = T::from_usize(dims.degree().max(1)).unwrap();
    let resx0 = T::one().max(std.q.norm());
    let resy0 = T::one().max(std.b.norm());
    let resz0 = T::one().max(std.h.norm());
    let e = cone::identity::<T>(dims);
    let half = T::lit(0.5);

    // Best iterate meeting the stall tolerances, or failing that the
    // acceptance tolerance. Near the solution the scaled KKT system loses
    // accuracy and the residuals can creep back up; the run then falls back
    // to this point.
    let mut best: Option<(bool, T, Iterate<T>)> = None;
    let fail = |best: Option<(bool, T, Iterate<T>)>, iter: usize| match best {
        Some((_, _, b)) => Outcome::Converged(b),
        None => Outcome::Failed(iter),
    };

    for iter in 0..=opts.max_iter {
        it.iterations = iter;
        let px = &std.p * &it.x;
        let rx = &px + &std.q + std.a.transpose() * &it.y + std.g.transpose() * &it.z;
        let ry = &std.a * &it.x - &std.b;
        let rz = &std.g * &it.x + &it.s - &std.h;
        let gap = it.s.dot(&it.z);
        let pcost = half * it.x.dot(&px) + std.q.dot(&it.x);
        let dcost = pcost + it.y.dot(&ry) + it.z.dot(&rz) - gap;
        let pres = (ry.norm() / resy0).max(rz.norm() / resz0);
        let dres = rx.norm() / resx0;
        let relgap = if pcost < T::zero() {
            gap / -pcost
        } else if dcost > T::zero() {
            gap / dcost
        } else {
            T::lit(f64::INFINITY)
        };
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            return fail(best, iter);
        }
        let gap_ok = |abs: T, rel: T| gap <= abs || relgap <= rel;
        if pres <= opts.feas_tol && dres <= opts.feas_tol && gap_ok(opts.abs_gap_tol, opts.rel_gap_tol) {
            return Outcome::Converged(it);
        }
        let within = |tol: T| pres <= tol && dres <= tol && gap_ok(tol, tol);
        let stalled_ok = within(opts.stall_feas_tol);
        let merit = pres.max(dres).max(gap.min(relgap));
        if let Some((true, m, _)) = &best {
            if merit > *m * T::lit(1e3) {
                return fail(best, iter);
            }
        }
        if stalled_ok || within(opts.accept_tol) {
            let better = match &best {
                None => true,
                Some((tier, m, _)) => (stalled_ok && !tier) || (stalled_ok == *tier && merit < *m),
            };
            if better {
                best = Some((stalled_ok, merit, it.clone()));
            }
        }
        if iter == opts.max_iter {
            return fail(best, iter);
        }

        let Some(w) = Scaling::new(dims, &it.s, &it.z) else {
            return fail(best, iter);
        };
        let lambda = w.apply(&it.z);
        let Some(kkt) = Kkt::factor(std, Some(&w)) else {
            return fail(best, iter);
        };
        let mu = gap / degree;
        let lambda_sq = cone::jordan_product(dims, &lambda, &lambda);

        let newton = |target: &DVector<T>| -> Option<Direction<T>> {
            let t = cone::jordan_divide(dims, &lambda, target);
            let (dx, dy, dz) = kkt.solve(std, &(-&rx), &(-&ry), &(-&rz - w.apply(&t)))?;
            let ds = w.apply(&(&t - w.apply(&dz)));
            Some((dx, dy, dz, ds))
        };

        // Predictor.
        let Some((_, _, dz_a, ds_a)) = newton(&(-&lambda_sq)) else {
            return fail(best, iter);
        };
        let alpha_aff = T::one()
            .min(cone::max_step(dims, &it.s, &ds_a))
            .min(cone::max_step(dims, &it.z, &dz_a));
        let sigma = (T::one() - alpha_aff).max(T::zero()).powi(3);

        // Corrector.
        let ds_scaled = w.apply_inv(&ds_a);
        let dz_scaled = w.apply(&dz_a);
        let target = -&lambda_sq - cone::jordan_product(dims, &ds_scaled, &dz_scaled) + &e * (sigma * mu);
        let Some((dx, dy, dz, ds)) = newton(&target) else {
            return fail(best, iter);
        };
        let alpha_max = cone::max_step(dims, &it.s, &ds).min(cone::max_step(dims, &it.z, &dz));
        let mut alpha = T::one().min(opts.step_fraction * alpha_max);
        // Once feasible, Mehrotra steps can raise the gap through the
        // second-order term and cycle between active sets; shorten until the
        // gap decreases.
        let decrease = T::lit(0.1) * (T::one() - sigma);
        let feasible = pres.max(dres) <= opts.feas_tol.sqrt();
        if feasible {
            // A centering step may legitimately raise the gap; if no
            // shortened step lowers it, keep the full one.
            let mut trial_alpha = alpha;
            for _ in 0..30 {
                let trial = (&it.s + &ds * trial_alpha).dot(&(&it.z + &dz * trial_alpha));
                if trial <= gap * (T::one() - decrease * trial_alpha) {
                    alpha = trial_alpha;
                    break;
                }
                trial_alpha *= T::lit(0.7);
            }
        }
        if !(alpha > T::eps()) {
            return fail(best, iter);
        }
        it.x += &dx * alpha;
        it.y += &dy * alpha;
        it.z += &dz * alpha;
        it.s += &ds * alpha;
    }
    fail(best, opts.max_iter)
}

pub(crate) fn solve<T: Real>(prog: &ConicProgram<T>, opts: &IpmOptions<T>) -> SolveReport<T> {
    let n = prog.dim();
    let zero_tol = T::eps() * T::lit(1e3);
    let Some(std) = Standard::new(prog, zero_tol) else {
        return SolveReport::failed(SolveStatus::Infeasible, n, 0);
    };
    match run(&std, opts) {
        Outcome::Converged(it) => report(prog, &std, it, opts),
        Outcome::Failed(iters) => classify(prog, &std, opts, iters),
    }
}

fn report<T: Real>(prog: &ConicProgram<T>, std: &Standard<T>, it: Iterate<T>, opts: &IpmOptions<T>) -> SolveReport<T> {
    let px = &std.p * &it.x;
    let rx = &px + &std.q + std.a.transpose() * &it.y + std.g.transpose() * &it.z;
    let ry = &std.a * &it.x - &std.b;
    let rz = &std.g * &it.x + &it.s - &std.h;
    let gap = it.s.dot(&it.z);
    let objective = prog.objective(&it.x);
    let dual_objective = objective + it.y.dot(&ry) + it.z.dot(&rz) - gap;
    let primal_residual = prog.max_violation(&it.x);
    let dual_residual = rx.amax();
    let mut eq_dual = DVector::zeros(prog.a_eq.nrows());
    for (k, &row) in std.eq_rows.iter().enumerate() {
        eq_dual[row] = it.y[k];
    }
    let dual_scale = T::one().max(std.q.amax()).max(px.amax());
    let status = if primal_residual <= opts.accept_tol && dual_residual <= opts.accept_tol * dual_scale {
        SolveStatus::Optimal
    } else {
        SolveStatus::SolverFailure
    };
    SolveReport {
        status,
        x: it.x,
        objective,
        dual_objective,
        primal_residual,
        dual_residual,
        iterations: it.iterations,
        ineq_dual: it.z,
        eq_dual,
        certificate: None,
    }
}

/// Decide between infeasible, unbounded and numerical failure after the
/// main iteration gave up.
fn classify<T: Real>(prog: &ConicProgram<T>, std: &Standard<T>, opts: &IpmOptions<T>, iters: usize) -> SolveReport<T> {
    let n = prog.dim();
    let all_linear = std.dims.soc.iter().all(|&k| k == 1);
    if all_linear {
        let pe = std.a.nrows();
        let mi = std.g.nrows();
        let mut g = DMatrix::zeros(mi + 2 * pe, n);
        let mut h = DVector::zeros(mi + 2 * pe);
        g.rows_mut(0, mi).copy_from(&std.g);
        h.rows_mut(0, mi).copy_from(&std.h);
        g.rows_mut(mi, pe).copy_from(&std.a);
        h.rows_mut(mi, pe).copy_from(&std.b);
        g.rows_mut(mi + pe, pe).copy_from(&(-&std.a));
        h.rows_mut(mi + pe, pe).copy_from(&(-&std.b));
        let cost = if std.p.amax() == T::zero() {
            std.q.clone()
        } else {
            DVector::zeros(n)
        };
        if let Ok(lp) = solve_lp(&cost, &g, &h) {
            match lp.status {
                SolveStatus::Infeasible | SolveStatus::Unbounded => {
                    let mut rep = SolveReport::failed(lp.status, n, iters);
                    rep.certificate = lp.certificate;
                    return rep;
                }
                _ => {}
            }
        }
        return SolveReport::failed(SolveStatus::SolverFailure, n, iters);
    }

    // Phase one: min t  s.t.  G x - t e + s = h, A x = b, t >= -1.
    let m = std.g.nrows();
    let e = cone::identity::<T>(&std.dims);
    let mut g = DMatrix::zeros(m + 1, n + 1);
    let mut h = DVector::zeros(m + 1);
    g[(0, n)] = -T::one();
    h[0] = T::one();
    g.view_mut((1, 0), (m, n)).copy_from(&std.g);
    for i in 0..m {
        g[(i + 1, n)] = -e[i];
    }
    h.rows_mut(1, m).copy_from(&std.h);
    let mut q = DVector::zeros(n + 1);
    q[n] = T::one();
    let mut a = DMatrix::zeros(std.a.nrows(), n + 1);
    a.view_mut((0, 0), (std.a.nrows(), n)).copy_from(&std.a);
    let phase_one = Standard {
        p: DMatrix::zeros(n + 1, n + 1),
        q,
        a,
        b: std.b.clone(),
        g,
        h,
        dims: ConeDims {
            nonneg: std.dims.nonneg + 1,
            soc: std.dims.soc.clone(),
        },
        eq_rows: std.eq_rows.clone(),
    };
    if let Outcome::Converged(it) = run(&phase_one, opts) {
        let t = it.x[n];
        if t > opts.accept_tol {
            let mut rep = SolveReport::failed(SolveStatus::Infeasible, n, iters + it.iterations);
            rep.certificate = Some(it.z.rows(1, m).into_owned());
            return rep;
        }
    }
    SolveReport::failed(SolveStatus::SolverFailure, n, iters)
}
