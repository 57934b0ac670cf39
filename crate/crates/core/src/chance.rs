//! Distributionally robust tightening of the scalar output chance constraint
//! `P(E y <= p) >= 1 - epsilon`.
//!
//! For a model vertex `f` and the augmented regressor `phi_bar = [phi; 1; 1]`
//! the constraint is enforced as
//!
//! ```text
//! kappa * sqrt(phi_bar' Gamma phi_bar) + E f phi - p <= 0,
//! kappa = sqrt((1 - epsilon) / epsilon).
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::fir::{FirDims, FirModel, Regressor};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ChanceSpec<T: Real> {
    e_row: DVector<T>,
    p: T,
    epsilon: T,
}

impl<T: Real> ChanceSpec<T> {
    pub fn new(e_row: DVector<T>, p: T, epsilon: T) -> Result<Self> {
        kappa_of(epsilon)?;
        if e_row.is_empty() {
            return Err(Error::InvalidArgument("constraint row is empty".into()));
        }
        Ok(Self { e_row, p, epsilon })
    }

    pub fn e_row(&self) -> &DVector<T> {
        &self.e_row
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn kappa(&self) -> T {
        ((T::one() - self.epsilon) / self.epsilon).sqrt()
    }

    /// `E y` for an output vector.
    pub fn apply(&self, y: &DVector<T>) -> T {
        self.e_row.dot(y)
    }

    /// Row vector `E f`, the output-constraint normal in regressor space.
    pub fn project_model(&self, model: &FirModel<T>) -> DVector<T> {
        model.matrix().tr_mul(&self.e_row)
    }
}

/// `sqrt((1 - epsilon) / epsilon)` for `epsilon` in `(0, 1)`.
pub fn kappa_of<T: Real>(epsilon: T) -> Result<T> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "violation level must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(((T::one() - epsilon) / epsilon).sqrt())
}

/// Second moment of `[phi; 1; 1]` paired with the uncertain terms. Only the
/// disturbance slot is populated since the disturbance is independent of the
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendedCovariance<T: Real> {
    pub gamma: DMatrix<T>,
}

impl<T: Real> AppendedCovariance<T> {
    /// Regressor length the matrix was built for.
    pub fn regressor_len(&self) -> usize {
        self.gamma.nrows() - 2
    }

    /// `kappa * sqrt(gamma[n, n])` when the disturbance slot is the only
    /// nonzero entry; the square-root term is then the same for every
    /// regressor and the cone row is a shifted linear row.
    pub fn constant_tightening(&self, spec: &ChanceSpec<T>) -> Option<T> {
        let n = self.regressor_len();
        let only_slot = self
            .gamma
            .iter()
            .enumerate()
            .all(|(k, &v)| v == T::zero() || (k % self.gamma.nrows() == n && k / self.gamma.nrows() == n));
        only_slot.then(|| spec.kappa() * self.gamma[(n, n)].max(T::zero()).sqrt())
    }

    /// `L` with `L' L = Gamma`, one row per positive eigenvalue.
    pub fn factor(&self) -> DMatrix<T> {
        let eig = self.gamma.clone().symmetric_eigen();
        let top = eig.eigenvalues.amax();
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > top * T::lit(1e-14))
            .collect();
        let mut l = DMatrix::zeros(keep.len(), self.gamma.ncols());
        for (r, &i) in keep.iter().enumerate() {
            let s = eig.eigenvalues[i].sqrt();
            for c in 0..self.gamma.ncols() {
                l[(r, c)] = s * eig.eigenvectors[(c, i)];
            }
        }
        l
    }

    /// `sqrt(phi_bar' Gamma phi_bar)` with `phi_bar = [phi; 1; 1]`.
    pub fn spread(&self, phi: &Regressor<T>) -> T {
        let bar = augmented(phi);
        (bar.dot(&(&self.gamma * &bar))).max(T::zero()).sqrt()
    }
}

fn augmented<T: Real>(phi: &Regressor<T>) -> DVector<T> {
    let v = phi.as_vector();
    let n = v.len();
    DVector::from_fn(n + 2, |i, _| if i < n { v[i] } else { T::one() })
}

pub fn build_gamma<T: Real>(
    spec: &ChanceSpec<T>,
    sigma_w2: &DMatrix<T>,
    dims: FirDims,
) -> Result<AppendedCovariance<T>> {
    check_len("constraint row", dims.n_y(), spec.e_row.len())?;
    check_len("noise covariance rows", dims.n_y(), sigma_w2.nrows())?;
    check_len("noise covariance columns", dims.n_y(), sigma_w2.ncols())?;
    let n = dims.regressor_len();
    let mut gamma = DMatrix::zeros(n + 2, n + 2);
    gamma[(n, n)] = spec.e_row.dot(&(sigma_w2 * &spec.e_row));
    Ok(AppendedCovariance { gamma })
}

/// Left side of the tightened constraint at one vertex; `<= 0` means the
/// row holds.
pub fn cone_row_residual<T: Real>(
    phi: &Regressor<T>,
    gamma: &AppendedCovariance<T>,
    spec: &ChanceSpec<T>,
    vertex: &FirModel<T>,
) -> Result<T> {
    check_len("regressor length", gamma.regressor_len(), phi.len())?;
    check_len("vertex columns", phi.len(), vertex.matrix().ncols())?;
    check_len("vertex rows", spec.e_row.len(), vertex.matrix().nrows())?;
    let mean = spec.project_model(vertex).dot(phi.as_vector());
    Ok(spec.kappa() * gamma.spread(phi) + mean - spec.p)
}
