//! Seeded random controls for ensemble checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `count` coefficient vectors of length `modes` with iid standard normal
/// entries, reproducible from `seed`.
pub fn gaussian_cosine_coeffs(seed: u64, count: usize, modes: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..modes).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}
