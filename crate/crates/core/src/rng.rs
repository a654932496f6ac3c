//! Seed streams and exact Poisson sampling.
//!
//! Every random quantity is a pure function of a `u64` seed. Sub-streams are
//! derived by mixing a parent seed with a tag through SplitMix64, so parallel
//! replicates never share state and results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a tag.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in [0, 1) addressed by `(seed, index)` without any sequential state.
pub fn addressed_uniform(seed: u64, index: i64) -> f64 {
    let bits = mix64(derive_seed(seed, index as u64));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

const INVERSION_LIMIT: f64 = 30.0;

/// Exact Poisson draw.
///
/// Means below 30 use sequential inversion. Larger means are split into
/// independent pieces of mean at most 30 whose counts are summed, which is
/// exact by additivity of the Poisson law.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    assert!(
        mean.is_finite() && mean >= 0.0,
        "poisson mean must be finite and >= 0"
    );
    if mean == 0.0 {
        return 0;
    }
    let pieces = (mean / INVERSION_LIMIT).ceil() as u64;
    let piece_mean = mean / pieces as f64;
    (0..pieces)
        .map(|_| poisson_inversion(piece_mean, rng))
        .sum()
}

fn poisson_inversion<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.gen();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        // cdf can stall just below 1 through round-off
        if p < 1e-300 && k as f64 > mean {
            break;
        }
    }
    k
}

/// Draw an index from nonnegative weights by inversion.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // round-off: last index with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn addressed_uniform_in_unit_interval() {
        for i in -50..50 {
            let u = addressed_uniform(11, i);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn poisson_zero_mean() {
        let mut rng = rng_from_seed(0);
        assert_eq!(sample_poisson(0.0, &mut rng), 0);
    }

    #[test]
    fn poisson_moments_large_mean() {
        let mut rng = rng_from_seed(5);
        let m = 20_000;
        let xs: Vec<f64> = (0..m)
            .map(|_| sample_poisson(75.0, &mut rng) as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!((mean - 75.0).abs() < 3.0 * (75.0f64 / m as f64).sqrt());
        assert!((var - 75.0).abs() < 3.0 * 75.0 * (2.0 / m as f64).sqrt() * 1.2);
    }
}
