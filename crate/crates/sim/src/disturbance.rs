//! Seeded disturbance sequences.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::config::Family;

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    pub family: Family,
    pub bound: DVector<f64>,
    /// Standard deviation before truncation; unused for the uniform family.
    pub sigma: DVector<f64>,
}

/// `len` i.i.d. samples, each component inside `[-bound, bound]`.
///
/// The same seed always yields the same sequence, independent of the
/// controller that consumes it.
pub fn generate_disturbance(seed: u64, len: usize, spec: &DisturbanceSpec) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.bound.len();
    let normals: Vec<Option<Normal<f64>>> = (0..n)
        .map(|j| match spec.family {
            Family::TruncatedGaussian => Normal::new(0.0, spec.sigma[j]).ok(),
            Family::Uniform => None,
        })
        .collect();
    (0..len)
        .map(|_| {
            DVector::from_fn(n, |j, _| {
                let b = spec.bound[j];
                if b == 0.0 {
                    return 0.0;
                }
                match &normals[j] {
                    None => rng.random_range(-b..=b),
                    Some(normal) => loop {
                        let v = normal.sample(&mut rng);
                        if v.abs() <= b {
                            break v;
                        }
                    },
                }
            })
        })
        .collect()
}

/// SHA-256 over the little-endian bytes of every sample, hex encoded.
pub fn sequence_hash(seq: &[DVector<f64>]) -> String {
    let mut h = Sha256::new();
    for w in seq {
        for v in w.iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(b: f64) -> DisturbanceSpec {
        DisturbanceSpec {
            family: Family::Uniform,
            bound: DVector::from_element(1, b),
            sigma: DVector::zeros(1),
        }
    }

    #[test]
    fn uniform_samples_stay_in_bound() {
        let s = generate_disturbance(3, 5000, &uniform(1.0));
        assert!(s.iter().all(|w| w[0].abs() <= 1.0));
        let mean: f64 = s.iter().map(|w| w[0]).sum::<f64>() / 5000.0;
        let var: f64 = s.iter().map(|w| w[0] * w[0]).sum::<f64>() / 5000.0;
        assert!(mean.abs() < 0.05);
        assert!((var - 1.0 / 3.0).abs() < 0.03);
    }

    #[test]
    fn zero_bound_is_silent() {
        assert!(generate_disturbance(1, 50, &uniform(0.0)).iter().all(|w| w[0] == 0.0));
    }

    #[test]
    fn seeds_reproduce() {
        let a = generate_disturbance(42, 21, &uniform(1.0));
        let b = generate_disturbance(42, 21, &uniform(1.0));
        let c = generate_disturbance(43, 21, &uniform(1.0));
        assert_eq!(a, b);
        assert_eq!(sequence_hash(&a), sequence_hash(&b));
        assert_ne!(sequence_hash(&a), sequence_hash(&c));
    }

    #[test]
    fn truncated_gaussian_in_bound() {
        let spec = DisturbanceSpec {
            family: Family::TruncatedGaussian,
            bound: DVector::from_element(2, 0.5),
            sigma: DVector::from_element(2, 1.0),
        };
        let s = generate_disturbance(9, 2000, &spec);
        assert!(s.iter().all(|w| w.amax() <= 0.5));
    }
}
