//! Seeded randomness. Every stream is derived from `(seed, index)` so results do
//! not depend on how work is partitioned across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Vector;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn stream(seed: u64, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, index))
}

pub fn unit_vector(rng: &mut Rng, d: usize) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::RngExt;
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn index(rng: &mut Rng, n: usize) -> usize {
    use rand::RngExt;
    rng.random_range(0..n)
}

/// Uniform point in the ball `B(center, radius)`.
pub fn in_ball(rng: &mut Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let dir = unit_vector(rng, d);
    let r = radius * uniform(rng, 0.0, 1.0).powf(1.0 / d as f64);
    center.iter().zip(dir.iter()).map(|(c, u)| c + r * u).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let a = unit_vector(&mut stream(7, 3), 3);
        let b = unit_vector(&mut stream(7, 3), 3);
        assert_eq!(a, b);
        let c = unit_vector(&mut stream(7, 4), 3);
        assert_ne!(a, c);
    }
}
