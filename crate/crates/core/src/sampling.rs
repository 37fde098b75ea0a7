//! Proportional sampling by cumulative-weight inversion, plus seed plumbing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RNG used throughout the crate. ChaCha keeps streams identical across
/// platforms, which the replay determinism checks rely on.
pub type CoreRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> CoreRng {
    CoreRng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverts the cumulative distribution of `masses` at `target`, which must
/// lie in `[0, total)`. Returns the first index whose running sum exceeds
/// `target`, skipping zero-mass entries. Falls back to the last positive entry
/// when rounding pushes `target` past the final sum.
pub fn invert_linear(masses: &[f64], target: f64) -> Option<usize> {
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &m) in masses.iter().enumerate() {
        if m > 0.0 {
            acc += m;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// Draws one index with probability `masses[i] / sum(masses)`.
pub fn sample_linear<R: Rng + ?Sized>(masses: &[f64], total: f64, rng: &mut R) -> Option<usize> {
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = rng.random::<f64>() * total;
    invert_linear(masses, target)
}

/// Prefix sums for repeated draws from one distribution.
pub struct CumulativeTable {
    prefix: Vec<f64>,
}

impl CumulativeTable {
    pub fn new(masses: &[f64]) -> Self {
        let mut acc = 0.0;
        let prefix = masses
            .iter()
            .map(|&m| {
                acc += m.max(0.0);
                acc
            })
            .collect();
        Self { prefix }
    }

    pub fn total(&self) -> f64 {
        self.prefix.last().copied().unwrap_or(0.0)
    }

    /// Index `i` with `prefix[i-1] <= target < prefix[i]`.
    pub fn invert(&self, target: f64) -> usize {
        let i = self.prefix.partition_point(|&p| p <= target);
        if i < self.prefix.len() {
            return i;
        }
        // Rounding overshoot: last entry with positive mass.
        let mut j = self.prefix.len() - 1;
        while j > 0 && self.prefix[j] == self.prefix[j - 1] {
            j -= 1;
        }
        j
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.invert(rng.random::<f64>() * self.total())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_inversion_skips_zero_mass() {
        let m = [0.0, 1.0, 0.0, 3.0];
        assert_eq!(invert_linear(&m, 0.0), Some(1));
        assert_eq!(invert_linear(&m, 0.999), Some(1));
        assert_eq!(invert_linear(&m, 1.0), Some(3));
        assert_eq!(invert_linear(&m, 10.0), Some(3));
        assert_eq!(invert_linear(&[0.0, 0.0], 0.0), None);
    }

    #[test]
    fn table_agrees_with_linear_scan() {
        let m = [0.5, 0.0, 2.0, 1.5, 0.0, 4.0];
        let table = CumulativeTable::new(&m);
        assert_eq!(table.total(), 8.0);
        for step in 0..800 {
            let t = step as f64 * 0.01;
            assert_eq!(Some(table.invert(t)), invert_linear(&m, t), "target {t}");
        }
        assert_eq!(table.invert(8.0), 5);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
