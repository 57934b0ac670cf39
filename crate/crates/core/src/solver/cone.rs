//! Product of a non-negative orthant and second-order cones: Jordan algebra
//! helpers and Nesterov-Todd scaling.

use nalgebra::DVector;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConeDims {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeDims {
    pub fn total(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant coordinate, one per cone.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    fn soc_ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.soc.iter().scan(self.nonneg, |off, &k| {
            let start = *off;
            *off += k;
            Some((start, k))
        })
    }
}

/// `x0^2 - ||x1||^2`, computed as a product to limit cancellation.
fn jnorm2<T: Real>(x: &[T]) -> T {
    let tail = x[1..].iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    (x[0] - tail) * (x[0] + tail)
}

pub(crate) fn identity<T: Real>(dims: &ConeDims) -> DVector<T> {
    let mut e = DVector::zeros(dims.total());
    for i in 0..dims.nonneg {
        e[i] = T::one();
    }
    for (start, _) in dims.soc_ranges() {
        e[start] = T::one();
    }
    e
}

/// Largest `t` with `x + t e` on the cone boundary, i.e. minus the smallest
/// Jordan eigenvalue. Negative iff `x` is interior.
pub(crate) fn max_eig_deficit<T: Real>(dims: &ConeDims, x: &DVector<T>) -> T {
    let mut worst = T::lit(f64::NEG_INFINITY);
    for i in 0..dims.nonneg {
        worst = worst.max(-x[i]);
    }
    for (start, k) in dims.soc_ranges() {
        let tail = x.rows(start + 1, k - 1).norm();
        worst = worst.max(tail - x[start]);
    }
    worst
}

pub(crate) fn jordan_product<T: Real>(dims: &ConeDims, u: &DVector<T>, v: &DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(u.len());
    for i in 0..dims.nonneg {
        out[i] = u[i] * v[i];
    }
    for (start, k) in dims.soc_ranges() {
        let us = u.rows(start, k);
        let vs = v.rows(start, k);
        out[start] = us.dot(&vs);
        for j in 1..k {
            out[start + j] = us[0] * vs[j] + vs[0] * us[j];
        }
    }
    out
}

/// Solves `lambda o y = x` for `y`.
pub(crate) fn jordan_divide<T: Real>(dims: &ConeDims, lambda: &DVector<T>, x: &DVector<T>) -> DVector<T> {
    let mut out = DVector::zeros(x.len());
    for i in 0..dims.nonneg {
        out[i] = x[i] / lambda[i];
    }
    for (start, k) in dims.soc_ranges() {
        let l = lambda.rows(start, k);
        let xs = x.rows(start, k);
        let det = jnorm2(l.as_slice());
        let tail_dot = (1..k).fold(T::zero(), |a, j| a + l[j] * xs[j]);
        let y0 = (l[0] * xs[0] - tail_dot) / det;
        out[start] = y0;
        for j in 1..k {
            out[start + j] = (xs[j] - y0 * l[j]) / l[0];
        }
    }
    out
}

/// Largest `alpha` such that `x + alpha d` stays in the cone, for interior
/// `x`. Returns `+inf` when the whole ray is feasible.
pub(crate) fn max_step<T: Real>(dims: &ConeDims, x: &DVector<T>, d: &DVector<T>) -> T {
    let inf = T::lit(f64::INFINITY);
    let mut alpha = inf;
    for i in 0..dims.nonneg {
        if d[i] < T::zero() {
            alpha = alpha.min(-x[i] / d[i]);
        }
    }
    for (start, k) in dims.soc_ranges() {
        let xs = x.rows(start, k);
        let ds = d.rows(start, k);
        let scale = jnorm2(xs.as_slice()).sqrt();
        let xb: Vec<T> = xs.iter().map(|&v| v / scale).collect();
        let db: Vec<T> = ds.iter().map(|&v| v / scale).collect();
        // Boost that maps xb to the identity, applied to db.
        let rho0 = xb[0] * db[0] - (1..k).fold(T::zero(), |a, j| a + xb[j] * db[j]);
        let coef = (rho0 + db[0]) / (xb[0] + T::one());
        let rho1 = (1..k)
            .fold(T::zero(), |a, j| {
                let v = db[j] - coef * xb[j];
                a + v * v
            })
            .sqrt();
        if rho1 > rho0 {
            alpha = alpha.min(T::one() / (rho1 - rho0));
        }
    }
    alpha
}

/// Nesterov-Todd scaling `W` with `W z = W^{-1} s = lambda`. Symmetric.
#[derive(Debug, Clone)]
pub(crate) struct Scaling<T: Real> {
    dims: ConeDims,
    diag: Vec<T>,
    /// Per cone: `beta` and unit-hyperbolic `v`, `W = beta (2 v v' - J)`.
    soc: Vec<(T, DVector<T>)>,
}

impl<T: Real> Scaling<T> {
    /// Requires `s` and `z` strictly interior.
    pub fn new(dims: &ConeDims, s: &DVector<T>, z: &DVector<T>) -> Option<Self> {
        let mut diag = Vec::with_capacity(dims.nonneg);
        for i in 0..dims.nonneg {
            if !(s[i] > T::zero() && z[i] > T::zero()) {
                return None;
            }
            diag.push((s[i] / z[i]).sqrt());
        }
        let mut soc = Vec::with_capacity(dims.soc.len());
        for (start, k) in dims.soc_ranges() {
            let ss = s.rows(start, k);
            let zs = z.rows(start, k);
            let js = jnorm2(ss.as_slice());
            let jz = jnorm2(zs.as_slice());
            if !(js > T::zero() && jz > T::zero() && ss[0] > T::zero() && zs[0] > T::zero()) {
                return None;
            }
            let sb = ss.map(|v| v / js.sqrt());
            let zb = zs.map(|v| v / jz.sqrt());
            let gamma = ((T::one() + sb.dot(&zb)) * T::lit(0.5)).sqrt();
            let mut w = DVector::zeros(k);
            w[0] = (sb[0] + zb[0]) / (gamma + gamma);
            for j in 1..k {
                w[j] = (sb[j] - zb[j]) / (gamma + gamma);
            }
            let denom = ((w[0] + T::one()) * T::lit(2.0)).sqrt();
            let mut v = w;
            v[0] += T::one();
            v /= denom;
            let beta = (js / jz).sqrt().sqrt();
            soc.push((beta, v));
        }
        Some(Self {
            dims: dims.clone(),
            diag,
            soc,
        })
    }

    pub fn apply(&self, x: &DVector<T>) -> DVector<T> {
        self.apply_impl(x, false)
    }

    pub fn apply_inv(&self, x: &DVector<T>) -> DVector<T> {
        self.apply_impl(x, true)
    }

    fn apply_impl(&self, x: &DVector<T>, inverse: bool) -> DVector<T> {
        let mut out = DVector::zeros(x.len());
        for i in 0..self.dims.nonneg {
            out[i] = if inverse {
                x[i] / self.diag[i]
            } else {
                x[i] * self.diag[i]
            };
        }
        for ((start, k), (beta, v)) in self.dims.soc_ranges().zip(&self.soc) {
            let xs = x.rows(start, k);
            // inverse: (1/beta) (2 Jv (Jv)' - J)
            let mut vv = v.clone();
            if inverse {
                for j in 1..k {
                    vv[j] = -vv[j];
                }
            }
            let proj = vv.dot(&xs);
            let scale = if inverse { T::one() / *beta } else { *beta };
            out[start] = scale * (T::lit(2.0) * vv[0] * proj - xs[0]);
            for j in 1..k {
                out[start + j] = scale * (T::lit(2.0) * vv[j] * proj + xs[j]);
            }
        }
        out
    }

    /// `W^{-1}` applied to every column of `m`.
    pub fn apply_inv_cols(&self, m: &nalgebra::DMatrix<T>) -> nalgebra::DMatrix<T> {
        let mut out = m.clone();
        for j in 0..m.ncols() {
            let col = self.apply_inv(&m.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }
}
