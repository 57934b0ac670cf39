//! Finite impulse response plant representation.
//!
//! The regressor stacks the last `m` inputs of every channel, newest first:
//! `[u_1(t-1) .. u_1(t-m), .., u_nu(t-1) .. u_nu(t-m)]`. Every other module
//! relies on this ordering.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Input count, output count and lag length per input channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FirDims {
    n_u: usize,
    n_y: usize,
    m: usize,
}

impl FirDims {
    pub fn new(n_u: usize, n_y: usize, m: usize) -> Result<Self> {
        if n_u == 0 || n_y == 0 || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "FIR dimensions must be positive (n_u={n_u}, n_y={n_y}, m={m})"
            )));
        }
        Ok(Self { n_u, n_y, m })
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Length of the regressor, `n_u * m`.
    pub fn regressor_len(&self) -> usize {
        self.n_u * self.m
    }

    /// Length of the vectorized model, `n_y * n_u * m`.
    pub fn param_len(&self) -> usize {
        self.n_y * self.n_u * self.m
    }
}

/// Stacked past inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor<T: Real> {
    phi: DVector<T>,
}

impl<T: Real> Regressor<T> {
    pub fn new(dims: FirDims, phi: DVector<T>) -> Result<Self> {
        check_len("regressor length", dims.regressor_len(), phi.len())?;
        Ok(Self { phi })
    }

    pub fn from_slice(dims: FirDims, phi: &[T]) -> Result<Self> {
        Self::new(dims, DVector::from_column_slice(phi))
    }

    pub fn zeros(dims: FirDims) -> Self {
        Self {
            phi: DVector::zeros(dims.regressor_len()),
        }
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.phi
    }

    pub fn into_vector(self) -> DVector<T> {
        self.phi
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Impulse-response coefficient matrix, `n_y x (n_u m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirModel<T: Real> {
    h: DMatrix<T>,
}

impl<T: Real> FirModel<T> {
    pub fn new(dims: FirDims, h: DMatrix<T>) -> Result<Self> {
        check_len("model rows", dims.n_y(), h.nrows())?;
        check_len("model columns", dims.regressor_len(), h.ncols())?;
        Ok(Self { h })
    }

    /// Builds a model from row-major coefficients.
    pub fn from_row_slice(dims: FirDims, coeffs: &[T]) -> Result<Self> {
        check_len("model coefficients", dims.param_len(), coeffs.len())?;
        Ok(Self {
            h: DMatrix::from_row_slice(dims.n_y(), dims.regressor_len(), coeffs),
        })
    }

    pub fn zeros(dims: FirDims) -> Self {
        Self {
            h: DMatrix::zeros(dims.n_y(), dims.regressor_len()),
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.h
    }

    /// Row-major vectorization `[H_1, .., H_ny]`, the stacking used by the
    /// estimator.
    pub fn to_vector(&self) -> DVector<T> {
        DVector::from_iterator(
            self.h.len(),
            (0..self.h.nrows()).flat_map(|i| (0..self.h.ncols()).map(move |j| self.h[(i, j)])),
        )
    }
}

/// Block-diagonal shift matrices advancing the regressor by one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperators<T: Real> {
    pub w_op: DMatrix<T>,
    pub z_op: DMatrix<T>,
}

pub fn build_shift_operators<T: Real>(dims: FirDims) -> ShiftOperators<T> {
    let (n_u, m) = (dims.n_u(), dims.m());
    let n = dims.regressor_len();
    let mut w_op = DMatrix::zeros(n, n);
    let mut z_op = DMatrix::zeros(n, n_u);
    for ch in 0..n_u {
        let base = ch * m;
        for k in 1..m {
            w_op[(base + k, base + k - 1)] = T::one();
        }
        z_op[(base, ch)] = T::one();
    }
    ShiftOperators { w_op, z_op }
}

/// `W phi + Z u`: every channel block shifts right by one and takes the new
/// input at its head.
pub fn advance_regressor<T: Real>(dims: FirDims, phi: &Regressor<T>, u: &DVector<T>) -> Result<Regressor<T>> {
    check_len("regressor length", dims.regressor_len(), phi.len())?;
    check_len("input length", dims.n_u(), u.len())?;
    let m = dims.m();
    let mut next = DVector::zeros(dims.regressor_len());
    for ch in 0..dims.n_u() {
        let base = ch * m;
        next[base] = u[ch];
        for k in 1..m {
            next[base + k] = phi.phi[base + k - 1];
        }
    }
    Ok(Regressor { phi: next })
}

/// `H phi + w`.
pub fn simulate_output<T: Real>(model: &FirModel<T>, phi: &Regressor<T>, w: &DVector<T>) -> Result<DVector<T>> {
    check_len("regressor length", model.h.ncols(), phi.len())?;
    check_len("disturbance length", model.h.nrows(), w.len())?;
    Ok(&model.h * &phi.phi + w)
}

/// Fixed point of `phi = W phi + Z u`: each channel block repeats its input.
pub fn steady_state_regressor<T: Real>(dims: FirDims, u: &DVector<T>) -> Result<Regressor<T>> {
    check_len("input length", dims.n_u(), u.len())?;
    let m = dims.m();
    Ok(Regressor {
        phi: DVector::from_fn(dims.regressor_len(), |i, _| u[i / m]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(n_u: usize, m: usize) -> FirDims {
        FirDims::new(n_u, 1, m).unwrap()
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(FirDims::new(0, 1, 3).is_err());
        assert!(FirDims::new(1, 0, 3).is_err());
        assert!(FirDims::new(1, 1, 0).is_err());
    }

    #[test]
    fn shift_operators_single_channel() {
        let ops = build_shift_operators::<f64>(dims(1, 3));
        let expected = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 1., 0., 0., 0., 1., 0.]);
        assert_eq!(ops.w_op, expected);
        assert_eq!(ops.z_op, DMatrix::from_column_slice(3, 1, &[1., 0., 0.]));
    }

    #[test]
    fn shift_operators_degenerate_lag() {
        let ops = build_shift_operators::<f64>(dims(1, 1));
        assert_eq!(ops.w_op, DMatrix::from_element(1, 1, 0.0));
        assert_eq!(ops.z_op, DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn shift_operators_two_channels() {
        let ops = build_shift_operators::<f64>(dims(2, 2));
        #[rustfmt::skip]
        let w = DMatrix::from_row_slice(4, 4, &[
            0., 0., 0., 0.,
            1., 0., 0., 0.,
            0., 0., 0., 0.,
            0., 0., 1., 0.,
        ]);
        #[rustfmt::skip]
        let z = DMatrix::from_row_slice(4, 2, &[
            1., 0.,
            0., 0.,
            0., 1.,
            0., 0.,
        ]);
        assert_eq!(ops.w_op, w);
        assert_eq!(ops.z_op, z);
        let nnz = ops.w_op.iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nnz, 2);
    }

    #[test]
    fn advance_examples() {
        let d = dims(1, 3);
        let phi = Regressor::from_slice(d, &[2., 2., 2.]).unwrap();
        let next = advance_regressor(d, &phi, &DVector::from_element(1, 5.)).unwrap();
        assert_eq!(next.as_vector().as_slice(), &[5., 2., 2.]);

        let zero = Regressor::<f64>::zeros(d);
        let next = advance_regressor(d, &zero, &DVector::zeros(1)).unwrap();
        assert_eq!(next.as_vector().as_slice(), &[0., 0., 0.]);

        let d2 = dims(2, 2);
        let phi = Regressor::from_slice(d2, &[1., 2., 3., 4.]).unwrap();
        let next = advance_regressor(d2, &phi, &DVector::from_column_slice(&[10., 20.])).unwrap();
        assert_eq!(next.as_vector().as_slice(), &[10., 1., 20., 3.]);
    }

    #[test]
    fn advance_matches_operator_form() {
        let d = dims(2, 3);
        let ops = build_shift_operators::<f64>(d);
        let phi = Regressor::from_slice(d, &[1., -2., 3., 0.5, 7., -1.]).unwrap();
        let u = DVector::from_column_slice(&[4., -4.]);
        let direct = advance_regressor(d, &phi, &u).unwrap();
        let via_ops = &ops.w_op * phi.as_vector() + &ops.z_op * &u;
        assert_eq!(direct.as_vector(), &via_ops);
    }

    #[test]
    fn advance_rejects_bad_input() {
        let d = dims(1, 3);
        let phi = Regressor::<f64>::zeros(d);
        assert!(advance_regressor(d, &phi, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn simulate_examples() {
        let d = dims(1, 3);
        let h = FirModel::from_row_slice(d, &[-4., 8., -9.]).unwrap();
        let phi = Regressor::from_slice(d, &[2., 2., 2.]).unwrap();
        let y = simulate_output(&h, &phi, &DVector::zeros(1)).unwrap();
        assert_eq!(y[0], -10.0);

        let zero = FirModel::<f64>::zeros(d);
        let y = simulate_output(&zero, &phi, &DVector::from_element(1, 0.3)).unwrap();
        assert_eq!(y[0], 0.3);

        let h = FirModel::from_row_slice(d, &[1., 0., 0.]).unwrap();
        let phi = Regressor::from_slice(d, &[7., 1., 1.]).unwrap();
        let y = simulate_output(&h, &phi, &DVector::from_element(1, -1.)).unwrap();
        assert_eq!(y[0], 6.0);

        assert!(simulate_output(&h, &phi, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn steady_state_examples() {
        let d = dims(1, 3);
        let s = steady_state_regressor(d, &DVector::from_element(1, 3.0)).unwrap();
        assert_eq!(s.as_vector().as_slice(), &[3., 3., 3.]);
        let s = steady_state_regressor(dims(1, 5), &DVector::from_element(1, 0.0)).unwrap();
        assert!(s.as_vector().iter().all(|&x| x == 0.0));
        let s = steady_state_regressor(dims(2, 2), &DVector::from_column_slice(&[1., -2.])).unwrap();
        assert_eq!(s.as_vector().as_slice(), &[1., 1., -2., -2.]);
    }

    #[test]
    fn works_in_single_precision() {
        let d = dims(1, 3);
        let h = FirModel::<f32>::from_row_slice(d, &[-4., 8., -9.]).unwrap();
        let phi = Regressor::from_slice(d, &[2f32, 2., 2.]).unwrap();
        let y = simulate_output(&h, &phi, &DVector::zeros(1)).unwrap();
        assert_eq!(y[0], -10f32);
    }

    proptest! {
        #[test]
        fn repeated_advance_reaches_steady_state(
            m in 1usize..=6,
            n_u in 1usize..=3,
            seed in proptest::collection::vec(-10.0f64..10.0, 18),
            u in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let d = FirDims::new(n_u, 1, m).unwrap();
            let u = DVector::from_column_slice(&u[..n_u]);
            let mut phi = Regressor::from_slice(d, &seed[..n_u * m]).unwrap();
            for _ in 0..m {
                phi = advance_regressor(d, &phi, &u).unwrap();
            }
            let ss = steady_state_regressor(d, &u).unwrap();
            prop_assert_eq!(phi, ss.clone());

            let ops = build_shift_operators::<f64>(d);
            let resid = ss.as_vector() - &ops.w_op * ss.as_vector() - &ops.z_op * &u;
            prop_assert!(resid.amax() <= 1e-15);
        }

        #[test]
        fn output_is_linear_in_regressor(
            h in proptest::collection::vec(-10.0f64..10.0, 6),
            p1 in proptest::collection::vec(-10.0f64..10.0, 3),
            p2 in proptest::collection::vec(-10.0f64..10.0, 3),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let d = FirDims::new(1, 2, 3).unwrap();
            let model = FirModel::from_row_slice(d, &h).unwrap();
            let r1 = Regressor::from_slice(d, &p1).unwrap();
            let r2 = Regressor::from_slice(d, &p2).unwrap();
            let mix = Regressor::new(d, r1.as_vector() * a + r2.as_vector() * b).unwrap();
            let zero = DVector::zeros(2);
            let lhs = simulate_output(&model, &mix, &zero).unwrap();
            let rhs = simulate_output(&model, &r1, &zero).unwrap() * a
                + simulate_output(&model, &r2, &zero).unwrap() * b;
            prop_assert!((lhs - rhs).amax() <= 1e-9);
        }
    }
}
