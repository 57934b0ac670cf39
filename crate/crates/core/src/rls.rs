//! Recursive least-squares estimate of the stacked coefficients and its
//! minimum-variance projection onto the feasible parameter set.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::fir::{FirDims, FirModel, Regressor};
use crate::fps::FeasibleParamSet;
use crate::scalar::Real;
use crate::solver::solve_qp;

/// Gaussian belief over the row-major stacked coefficients `[H_1, .., H_ny]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEstimate<T: Real> {
    pub mean: DVector<T>,
    pub covariance: DMatrix<T>,
    /// Disturbance covariance, `n_y x n_y`.
    pub noise_var: DMatrix<T>,
}

impl<T: Real> ModelEstimate<T> {
    pub fn new(dims: FirDims, mean: DVector<T>, covariance: DMatrix<T>, noise_var: DMatrix<T>) -> Result<Self> {
        let n = dims.param_len();
        check_len("estimate mean", n, mean.len())?;
        check_len("estimate covariance rows", n, covariance.nrows())?;
        check_len("estimate covariance columns", n, covariance.ncols())?;
        check_len("noise covariance rows", dims.n_y(), noise_var.nrows())?;
        check_len("noise covariance columns", dims.n_y(), noise_var.ncols())?;
        if !is_symmetric(&covariance) || min_eigenvalue(&covariance) < -T::lit(1e-12) {
            return Err(Error::InvalidArgument("covariance must be symmetric PSD".into()));
        }
        if !is_symmetric(&noise_var) || min_eigenvalue(&noise_var) < T::zero() {
            return Err(Error::InvalidArgument("noise covariance must be symmetric PSD".into()));
        }
        Ok(Self {
            mean,
            covariance,
            noise_var,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RlsOptions {
    /// Use the Joseph form `(I-KΦ)P(I-KΦ)' + K R K'` for the covariance.
    pub joseph: bool,
}

fn is_symmetric<T: Real>(m: &DMatrix<T>) -> bool {
    let scale = T::one().max(m.amax());
    (m - m.transpose()).amax() <= T::lit(1e-9) * scale
}

fn min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(T::lit(f64::INFINITY), |a, &b| a.min(b))
}

fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// `blkdiag(phi', .., phi')` with `n_y` blocks.
pub fn build_block_regressor<T: Real>(phi: &Regressor<T>, n_y: usize) -> DMatrix<T> {
    let n = phi.len();
    let v = phi.as_vector();
    let mut out = DMatrix::zeros(n_y, n_y * n);
    for j in 0..n_y {
        for k in 0..n {
            out[(j, j * n + k)] = v[k];
        }
    }
    out
}

/// One measurement update with `y = phi_blk * x + w`, `w ~ (0, noise_var)`.
pub fn rls_update<T: Real>(
    est: &ModelEstimate<T>,
    phi_blk: &DMatrix<T>,
    y: &DVector<T>,
    opts: &RlsOptions,
) -> Result<ModelEstimate<T>> {
    check_len("block regressor columns", est.mean.len(), phi_blk.ncols())?;
    check_len("block regressor rows", est.noise_var.nrows(), phi_blk.nrows())?;
    check_len("output length", phi_blk.nrows(), y.len())?;
    let p = &est.covariance;
    let pht = p * phi_blk.transpose();
    let innov = symmetrize(&(phi_blk * &pht + &est.noise_var));
    let inv = innov
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| innov.try_inverse())
        .ok_or(Error::Singular("innovation covariance"))?;
    let gain = &pht * inv;
    let mean = &est.mean + &gain * (y - phi_blk * &est.mean);
    let n = p.nrows();
    let ikh = DMatrix::identity(n, n) - &gain * phi_blk;
    let cov = if opts.joseph {
        &ikh * p * ikh.transpose() + &gain * &est.noise_var * gain.transpose()
    } else {
        &ikh * p
    };
    Ok(ModelEstimate {
        mean,
        covariance: symmetrize(&cov),
        noise_var: est.noise_var.clone(),
    })
}

/// Point of the feasible set closest to the mean in the metric of the
/// inverse covariance. Returns the mean itself when it already belongs.
pub fn project_estimate<T: Real>(est: &ModelEstimate<T>, fps: &FeasibleParamSet<T>) -> Result<DVector<T>> {
    let dims = fps.dims();
    check_len("estimate mean", dims.param_len(), est.mean.len())?;
    let model = mean_as_matrix(&est.mean, dims)?;
    if fps.contains(&model, T::zero()) {
        return Ok(est.mean.clone());
    }
    let metric = weighting_matrix(&est.covariance)?;
    let scale = metric.amax();
    let metric = metric / scale;

    let n = dims.regressor_len();
    let total_rows = fps.num_rows();
    let mut g = DMatrix::zeros(total_rows, dims.param_len());
    let mut h = DVector::zeros(total_rows);
    let mut r = 0;
    for (j, poly) in fps.rows().iter().enumerate() {
        for i in 0..poly.num_rows() {
            for k in 0..n {
                g[(r, j * n + k)] = poly.a()[(i, k)];
            }
            h[r] = poly.b()[i];
            r += 1;
        }
    }
    let q = -(&metric * &est.mean);
    let rep = solve_qp(
        &metric,
        &q,
        &g,
        &h,
        &DMatrix::zeros(0, dims.param_len()),
        &DVector::zeros(0),
    )?;
    if !rep.is_optimal() {
        return Err(Error::NotOptimal(format!("mean projection: {}", rep.status)));
    }
    Ok(rep.x)
}

/// Inverse covariance, regularized by `1e-10 I` when the covariance is
/// singular or its condition number exceeds `1e12`.
pub fn weighting_matrix<T: Real>(cov: &DMatrix<T>) -> Result<DMatrix<T>> {
    let eig = cov.clone().symmetric_eigenvalues();
    let lo = eig.iter().fold(T::lit(f64::INFINITY), |a, &b| a.min(b));
    let hi = eig.iter().fold(T::zero(), |a, &b| a.max(b));
    let n = cov.nrows();
    let work = if lo <= T::zero() || hi > T::lit(1e12) * lo {
        symmetrize(cov) + DMatrix::identity(n, n) * T::lit(1e-10)
    } else {
        symmetrize(cov)
    };
    let inv = work
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| work.try_inverse())
        .ok_or(Error::Singular("estimate covariance"))?;
    Ok(symmetrize(&inv))
}

/// Reshapes a stacked mean into the `n_y x (n_u m)` coefficient matrix.
pub fn mean_as_matrix<T: Real>(mean: &DVector<T>, dims: FirDims) -> Result<FirModel<T>> {
    FirModel::from_row_slice(dims, mean.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fps::{init_fps, FpsInitSpec};
    use crate::polytope::HPolytope;
    use approx::assert_abs_diff_eq;

    fn scalar_est(mean: f64, var: f64, noise: f64) -> ModelEstimate<f64> {
        ModelEstimate::new(
            FirDims::new(1, 1, 1).unwrap(),
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, var),
            DMatrix::from_element(1, 1, noise),
        )
        .unwrap()
    }

    #[test]
    fn scalar_gain_half() {
        let e = scalar_est(0.0, 1.0, 1.0);
        let out = rls_update(
            &e,
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::from_element(1, 2.0),
            &RlsOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(out.mean[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.covariance[(0, 0)], 0.5, epsilon = 1e-15);
        let j = rls_update(
            &e,
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::from_element(1, 2.0),
            &RlsOptions { joseph: true },
        )
        .unwrap();
        assert_abs_diff_eq!(j.covariance[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_regressor_or_zero_prior_is_inert() {
        let e = scalar_est(0.7, 1.0, 1.0);
        let out = rls_update(
            &e,
            &DMatrix::zeros(1, 1),
            &DVector::from_element(1, 9.0),
            &RlsOptions::default(),
        )
        .unwrap();
        assert_eq!(out, e);
        let e = scalar_est(0.7, 0.0, 1.0);
        let out = rls_update(
            &e,
            &DMatrix::from_element(1, 1, 3.0),
            &DVector::from_element(1, 9.0),
            &RlsOptions::default(),
        )
        .unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn singular_innovation_is_reported() {
        let e = scalar_est(0.0, 0.0, 0.0);
        assert_eq!(
            rls_update(
                &e,
                &DMatrix::from_element(1, 1, 1.0),
                &DVector::from_element(1, 1.0),
                &RlsOptions::default()
            ),
            Err(Error::Singular("innovation covariance"))
        );
    }

    #[test]
    fn block_regressor_layout() {
        let d = FirDims::new(1, 2, 2).unwrap();
        let phi = Regressor::from_slice(d, &[1.0, 0.0]).unwrap();
        let b = build_block_regressor(&phi, 2);
        assert_eq!(
            b,
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        );
        let d3 = FirDims::new(1, 1, 3).unwrap();
        let b = build_block_regressor(&Regressor::from_slice(d3, &[2.0, 2.0, 2.0]).unwrap(), 1);
        assert_eq!(b, DMatrix::from_row_slice(1, 3, &[2.0, 2.0, 2.0]));
    }

    #[test]
    fn reshape_round_trip() {
        let d = FirDims::new(1, 2, 2).unwrap();
        let m = mean_as_matrix(&DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0]), d).unwrap();
        assert_eq!(m.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(m.to_vector().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(mean_as_matrix::<f64>(&DVector::zeros(3), d).is_err());
    }

    fn box_fps(dims: FirDims, half: f64) -> FeasibleParamSet<f64> {
        init_fps(
            &FpsInitSpec {
                magnitude: half,
                decay: 1.0,
            },
            dims,
            &DVector::from_element(dims.n_y(), 1.0),
        )
        .unwrap()
    }

    #[test]
    fn projection_cases() {
        let d = FirDims::new(1, 1, 2).unwrap();
        let f = box_fps(d, 1.0);
        let inside = ModelEstimate::new(
            d,
            DVector::from_column_slice(&[0.2, -0.3]),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        assert_eq!(project_estimate(&inside, &f).unwrap(), inside.mean);
        let outside = ModelEstimate {
            mean: DVector::from_column_slice(&[2.0, 0.5]),
            ..inside
        };
        let p = project_estimate(&outside, &f).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-6);

        let d1 = FirDims::new(1, 1, 1).unwrap();
        let half = HPolytope::new(
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::from_column_slice(&[0.0, 5.0]),
        )
        .unwrap();
        let f1 = FeasibleParamSet::from_rows(d1, vec![half], DVector::from_element(1, 1.0)).unwrap();
        let p = project_estimate(&scalar_est(1.0, 1.0, 1.0), &f1).unwrap();
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn ill_conditioned_weight_is_regularized() {
        let cov: DMatrix<f64> = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.0]));
        let w = weighting_matrix(&cov).unwrap();
        assert!(w[(1, 1)] > 1e9);
        assert!(w.iter().all(|v| v.is_finite()));
    }
}
