//! Weight initialization.

use rand_chacha::rand_core::RngCore;

use super::Tensor;
use crate::scalar::Scalar;

/// Uniform draw in `[0, 1)` built from the top 53 bits of a `u64`, so the
/// stream depends only on the generator's raw output and not on any
/// distribution code that may change between library versions.
pub fn unit_uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Glorot/Xavier uniform initialization for a `[fan_in, fan_out]` matrix:
/// entries drawn from `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<T: Scalar, R: RngCore>(
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| T::from_f64((2.0 * unit_uniform(rng) - 1.0) * bound))
        .collect();
    Tensor::from_vec(&[fan_in, fan_out], data).expect("length matches shape by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_stay_within_the_xavier_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w: Tensor<f64> = xavier_uniform(50, 50, &mut rng);
        let bound = (6.0_f64 / 100.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
        assert_eq!(w.shape(), &[50, 50]);
    }

    #[test]
    fn sample_variance_approximates_two_over_fan_sum() {
        // U(-b, b) has variance b^2/3 = 2 / (fan_in + fan_out).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w: Tensor<f64> = xavier_uniform(200, 300, &mut rng);
        let n = w.len() as f64;
        let mean: f64 = w.data().iter().sum::<f64>() / n;
        let var: f64 = w
            .data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        let expected = 2.0 / 500.0;
        assert!(
            (var - expected).abs() / expected < 0.05,
            "variance {var} vs expected {expected}"
        );
    }

    #[test]
    fn same_seed_reproduces_the_same_matrix() {
        let a: Tensor<f64> = xavier_uniform(10, 10, &mut ChaCha8Rng::seed_from_u64(3));
        let b: Tensor<f64> = xavier_uniform(10, 10, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn unit_uniform_lies_in_the_half_open_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let u = unit_uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
