//! Chance-constraint tightening: closed form, degenerate cone rows and the
//! distribution-free guarantee.

use asmpc_core::chance::{build_gamma, cone_row_residual, kappa_of, ChanceSpec};
use asmpc_core::fir::{FirDims, FirModel, Regressor};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn spec(eps: f64) -> ChanceSpec<f64> {
    ChanceSpec::new(DVector::from_element(1, 1.0), 1.0, eps).unwrap()
}

#[test]
fn table_tightening_value() {
    let dims = FirDims::new(1, 1, 3).unwrap();
    let s = spec(0.3);
    let gamma = build_gamma(&s, &DMatrix::from_element(1, 1, 1.0 / 3.0), dims).unwrap();
    let tau = gamma.constant_tightening(&s).unwrap();
    assert!((tau - 0.8819).abs() <= 5e-5, "tau {tau}");
    assert!((s.kappa() - (0.7f64 / 0.3).sqrt()).abs() < 1e-15);
}

#[test]
fn kappa_rejects_levels_outside_the_unit_interval() {
    for eps in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
        assert!(kappa_of(eps).is_err());
    }
}

proptest! {
    #[test]
    fn cone_row_degenerates_to_shifted_linear_row(
        phi in prop::collection::vec(-5.0f64..5.0, 3),
        f in prop::collection::vec(-10.0f64..10.0, 3),
        var in 0.0f64..4.0,
        eps in 0.01f64..0.99,
    ) {
        let dims = FirDims::new(1, 1, 3).unwrap();
        let s = spec(eps);
        let gamma = build_gamma(&s, &DMatrix::from_element(1, 1, var), dims).unwrap();
        let phi = Regressor::from_slice(dims, &phi).unwrap();
        let vertex = FirModel::from_row_slice(dims, &f).unwrap();
        let cone = cone_row_residual(&phi, &gamma, &s, &vertex).unwrap();
        let tau = gamma.constant_tightening(&s).unwrap();
        let linear = vertex.matrix().row(0).transpose().dot(phi.as_vector()) + tau - s.p();
        prop_assert!((cone - linear).abs() <= 1e-12 * (1.0 + linear.abs()));
        // The factor reproduces Gamma.
        let l = gamma.factor();
        prop_assert!((l.transpose() * &l - &gamma.gamma).amax() <= 1e-12 * (1.0 + var));
    }

    #[test]
    fn kappa_decreases_in_the_violation_level(a in 0.001f64..0.999, b in 0.001f64..0.999) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(kappa_of(lo).unwrap() > kappa_of(hi).unwrap());
    }
}

/// `P(w > kappa sigma) <= epsilon` for any zero-mean law with variance
/// `sigma^2`; checked on the two-point law that attains the bound and on
/// uniform and Gaussian samples.
#[test]
fn tightening_holds_empirically() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 200_000;
    for eps in [0.05, 0.1, 0.3, 0.5] {
        let kappa = kappa_of(eps).unwrap();
        let sigma = 1.0 / 3.0f64.sqrt();
        let margin = 4.0 * (eps * (1.0 - eps) / n as f64).sqrt();

        let uniform = (0..n).filter(|_| rng.random_range(-1.0..1.0) > kappa * sigma).count() as f64 / n as f64;
        assert!(uniform <= eps + margin, "uniform eps={eps}: {uniform}");

        let normal = Normal::new(0.0, sigma).unwrap();
        let gauss = (0..n).filter(|_| normal.sample(&mut rng) > kappa * sigma).count() as f64 / n as f64;
        assert!(gauss <= eps + margin, "gaussian eps={eps}: {gauss}");

        // Mass eps at kappa*sigma (just above), 1-eps at -sigma/kappa: zero
        // mean, variance sigma^2.
        let hi = kappa * sigma * (1.0 + 1e-9);
        let lo = -sigma / kappa;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut hits = 0usize;
        for _ in 0..n {
            let w = if rng.random_bool(eps) { hi } else { lo };
            sum += w;
            sq += w * w;
            hits += usize::from(w > kappa * sigma);
        }
        let freq = hits as f64 / n as f64;
        assert!((sum / n as f64).abs() < 0.01);
        assert!((sq / n as f64 - sigma * sigma).abs() < 0.01);
        assert!(
            freq <= eps + margin && freq >= eps - margin,
            "two-point eps={eps}: {freq}"
        );
    }
}
