//! Seeded noise streams and child-seed derivation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// ChaCha stream carrying the Wiener increments.
pub const MEASUREMENT_STREAM: u64 = 0;
/// ChaCha stream carrying the bath jump draws, so that enabling the
/// sampled bath never perturbs the measurement noise path.
pub const BATH_STREAM: u64 = 1;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable child seed for trajectory `index` of an ensemble at measurement
/// strength `k`. Depends only on its arguments, never on list position.
pub fn derive_seed(base: u64, k: f64, index: u64) -> u64 {
    let mut h = splitmix64(base);
    h = splitmix64(h ^ k.to_bits());
    splitmix64(h ^ index)
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian increments with variance `dt`, one deviate per step.
#[derive(Clone, Debug)]
pub struct WienerIncrements {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
}

impl WienerIncrements {
    pub fn new(seed: u64, dt: f64) -> Self {
        Self {
            rng: stream(seed, MEASUREMENT_STREAM),
            sqrt_dt: dt.sqrt(),
        }
    }

    pub fn next_increment(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * self.sqrt_dt
    }

    /// Pre-draws `n` increments, e.g. to share one path between step sizes.
    pub fn path(seed: u64, dt: f64, n: usize) -> Vec<f64> {
        let mut w = Self::new(seed, dt);
        (0..n).map(|_| w.next_increment()).collect()
    }
}

/// Uniform draws for the sampled bath.
#[derive(Clone, Debug)]
pub struct BathDraws(ChaCha8Rng);

impl BathDraws {
    pub fn new(seed: u64) -> Self {
        Self(stream(seed, BATH_STREAM))
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(derive_seed(7, 0.1, 3), derive_seed(7, 0.1, 3));
        assert_ne!(derive_seed(7, 0.1, 3), derive_seed(7, 0.1, 4));
        assert_ne!(derive_seed(7, 0.1, 3), derive_seed(7, 1.0, 3));
        assert_ne!(derive_seed(7, 0.1, 3), derive_seed(8, 0.1, 3));
    }

    #[test]
    fn increments_have_variance_dt() {
        let dt = 1e-3;
        let path = WienerIncrements::path(42, dt, 200_000);
        let n = path.len() as f64;
        let mean = path.iter().sum::<f64>() / n;
        let var = path.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Standard error of the sample variance is dt·√(2/n) ≈ 3.2e-6.
        assert!((var - dt).abs() < 5.0 * dt * (2.0 / n).sqrt());
        assert!(mean.abs() < 5.0 * (dt / n).sqrt());
    }

    #[test]
    fn bath_stream_is_independent_of_measurement_stream() {
        let mut w = WienerIncrements::new(9, 1.0);
        let first = w.next_increment();
        let mut b = BathDraws::new(9);
        let _ = b.uniform();
        let mut w2 = WienerIncrements::new(9, 1.0);
        assert_eq!(first, w2.next_increment());
    }
}
