//! Set-membership identification: the set of every coefficient matrix that
//! explains all measurements so far up to the disturbance bound.
//!
//! Each measurement cuts row `j` of `H` with the slab
//! `|phi' h_j - y_j| <= w_bar_j`, so the set factors into one polytope per
//! output row.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::fir::{FirDims, FirModel, Regressor};
use crate::polytope::{GeometryTolerances, HPolytope};
use crate::scalar::Real;

/// Initial coefficient bounds `|h_{j,(i,k)}| <= magnitude * decay^(k-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsInitSpec<T> {
    pub magnitude: T,
    pub decay: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsOptions<T> {
    pub geometry: GeometryTolerances<T>,
    /// Upper limit on irredundant rows per output polytope.
    pub max_rows: usize,
}

impl<T: Real> Default for FpsOptions<T> {
    fn default() -> Self {
        Self {
            geometry: GeometryTolerances::default(),
            max_rows: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleParamSet<T: Real> {
    dims: FirDims,
    rows: Vec<HPolytope<T>>,
    w_bar: DVector<T>,
}

impl<T: Real> FeasibleParamSet<T> {
    /// Wraps explicit per-row polytopes.
    pub fn from_rows(dims: FirDims, rows: Vec<HPolytope<T>>, w_bar: DVector<T>) -> Result<Self> {
        check_len("output rows", dims.n_y(), rows.len())?;
        check_len("disturbance bound", dims.n_y(), w_bar.len())?;
        for p in &rows {
            check_len("row polytope dimension", dims.regressor_len(), p.dim())?;
            p.check_bounded_nonempty()?;
        }
        if w_bar.iter().any(|&w| w < T::zero()) {
            return Err(Error::InvalidArgument("disturbance bound must be non-negative".into()));
        }
        Ok(Self { dims, rows, w_bar })
    }

    pub fn dims(&self) -> FirDims {
        self.dims
    }

    pub fn rows(&self) -> &[HPolytope<T>] {
        &self.rows
    }

    pub fn w_bar(&self) -> &DVector<T> {
        &self.w_bar
    }

    /// Total halfspace count over all output rows.
    pub fn num_rows(&self) -> usize {
        self.rows.iter().map(HPolytope::num_rows).sum()
    }

    pub fn contains(&self, model: &FirModel<T>, tol: T) -> bool {
        let h = model.matrix();
        if h.nrows() != self.rows.len() {
            return false;
        }
        self.rows
            .iter()
            .enumerate()
            .all(|(j, p)| p.contains(&h.row(j).transpose(), tol))
    }

    /// Model whose row `j` is the Chebyshev center of row polytope `j`.
    pub fn chebyshev_center(&self, tol: &GeometryTolerances<T>) -> Result<FirModel<T>> {
        let n = self.dims.regressor_len();
        let mut h = DMatrix::zeros(self.dims.n_y(), n);
        for (j, p) in self.rows.iter().enumerate() {
            let (c, _) = p.chebyshev_center(tol)?;
            h.row_mut(j).copy_from(&c.transpose());
        }
        FirModel::new(self.dims, h)
    }
}

pub fn init_fps<T: Real>(spec: &FpsInitSpec<T>, dims: FirDims, w_bar: &DVector<T>) -> Result<FeasibleParamSet<T>> {
    if !(spec.magnitude > T::zero()) {
        return Err(Error::InvalidArgument("magnitude must be positive".into()));
    }
    if !(spec.decay > T::zero() && spec.decay <= T::one()) {
        return Err(Error::InvalidArgument("decay must lie in (0, 1]".into()));
    }
    let m = dims.m();
    let bound = DVector::from_fn(dims.regressor_len(), |i, _| {
        let mut v = spec.magnitude;
        for _ in 0..i % m {
            v *= spec.decay;
        }
        v
    });
    let row = HPolytope::from_box(&-&bound, &bound)?;
    FeasibleParamSet::from_rows(dims, vec![row; dims.n_y()], w_bar.clone())
}

/// Intersects the set with the slabs implied by measuring `y` at regressor
/// `phi`, then drops redundant rows.
///
/// Cuts are stored with unit normals, so containment tolerances read as
/// Euclidean distances.
pub fn update_fps<T: Real>(
    fps: &FeasibleParamSet<T>,
    phi: &Regressor<T>,
    y: &DVector<T>,
    opts: &FpsOptions<T>,
) -> Result<FeasibleParamSet<T>> {
    check_len("regressor length", fps.dims.regressor_len(), phi.len())?;
    check_len("output length", fps.dims.n_y(), y.len())?;
    let v = phi.as_vector();
    let norm = v.norm();
    let mut rows = Vec::with_capacity(fps.rows.len());
    for (j, poly) in fps.rows.iter().enumerate() {
        let (upper, lower) = (y[j] + fps.w_bar[j], -y[j] + fps.w_bar[j]);
        if norm == T::zero() {
            if upper < T::zero() || lower < T::zero() {
                return Err(Error::ModelInconsistency);
            }
            rows.push(poly.clone());
            continue;
        }
        let unit = v / norm;
        let cut = poly
            .add_halfspace(&unit, upper / norm)?
            .add_halfspace(&-&unit, lower / norm)?;
        let reduced = match cut.remove_redundant(&opts.geometry) {
            Ok(p) => p,
            Err(Error::EmptyPolytope) => return Err(Error::ModelInconsistency),
            Err(e) => return Err(e),
        };
        if reduced.num_rows() > opts.max_rows {
            return Err(Error::ComplexityCap {
                rows: reduced.num_rows(),
                cap: opts.max_rows,
            });
        }
        rows.push(reduced);
    }
    Ok(FeasibleParamSet {
        dims: fps.dims,
        rows,
        w_bar: fps.w_bar.clone(),
    })
}

/// Every combination of per-row vertices, assembled into full models.
pub fn fps_vertices<T: Real>(fps: &FeasibleParamSet<T>, tol: &GeometryTolerances<T>) -> Result<Vec<FirModel<T>>> {
    let per_row = fps
        .rows
        .iter()
        .map(|p| p.enumerate_vertices(tol))
        .collect::<Result<Vec<_>>>()?;
    let n = fps.dims.regressor_len();
    let n_y = fps.dims.n_y();
    let total: usize = per_row.iter().map(|v| v.len()).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; n_y];
    for _ in 0..total {
        let mut h = DMatrix::zeros(n_y, n);
        for j in 0..n_y {
            h.row_mut(j).copy_from(&per_row[j].vertices[idx[j]].transpose());
        }
        out.push(FirModel::new(fps.dims, h)?);
        for j in (0..n_y).rev() {
            idx[j] += 1;
            if idx[j] < per_row[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(out)
}
