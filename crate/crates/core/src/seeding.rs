//! Weighted k-means++ seeding followed by one Lloyd step.
//!
//! Used twice: as the bicriteria solver inside the coreset construction
//! (2k centers) and as the solution extractor the harness runs on top of a
//! coreset (k centers).

use rand::Rng;

use crate::error::{config, usage, Result};
use crate::geometry::{check_dims, dist2_slices, nearest, Point, Solution, WeightedPoint};
use crate::sampling::{rng_from_seed, sample_linear};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedingConfig {
    pub k_prime: usize,
    pub rng_seed: u64,
    pub lloyd_step: bool,
}

impl SeedingConfig {
    pub fn new(k_prime: usize, rng_seed: u64) -> Self {
        Self { k_prime, rng_seed, lloyd_step: true }
    }
}

/// k-means++ with the RNG seeded from `cfg.rng_seed`.
pub fn kmeanspp(points: &[WeightedPoint], cfg: &SeedingConfig) -> Result<Solution> {
    let mut rng = rng_from_seed(cfg.rng_seed);
    kmeanspp_with_rng(points, cfg.k_prime, cfg.lloyd_step, &mut rng)
}

/// Samples up to `k_prime` centers: the first proportional to weight, each
/// further one proportional to `w(x) * cost(x, S)`. Stops early once the
/// residual cost is zero, so the result has `min(k_prime, #distinct)` centers
/// when all weights are positive.
pub fn kmeanspp_with_rng<R: Rng + ?Sized>(
    points: &[WeightedPoint],
    k_prime: usize,
    lloyd: bool,
    rng: &mut R,
) -> Result<Solution> {
    if points.is_empty() {
        return Err(usage("k-means++ on an empty point set"));
    }
    if k_prime == 0 {
        return Err(config("k' must be at least 1"));
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(crate::Error::Shape { expected: dim, found: p.dim() });
    }

    let weights: Vec<f64> = points.iter().map(|p| p.weight).collect();
    let total_weight: f64 = weights.iter().sum();
    let first = sample_linear(&weights, total_weight, rng).unwrap_or(0);

    let mut centers = vec![points[first].point.clone()];
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| dist2_slices(p.coords(), centers[0].coords()))
        .collect();
    let mut mass: Vec<f64> = points.iter().zip(&min_d2).map(|(p, d)| p.weight * d).collect();

    while centers.len() < k_prime {
        let total: f64 = mass.iter().sum();
        let Some(next) = sample_linear(&mass, total, rng) else {
            break;
        };
        let c = points[next].point.clone();
        for (i, p) in points.iter().enumerate() {
            let d = dist2_slices(p.coords(), c.coords());
            if d < min_d2[i] {
                min_d2[i] = d;
                mass[i] = p.weight * d;
            }
        }
        centers.push(c);
    }

    let seeded = Solution::new(centers)?;
    if lloyd {
        Ok(lloyd_step_unchecked(&seeded, points))
    } else {
        Ok(seeded)
    }
}

/// Replaces each center by the weighted centroid of its cluster. Centers
/// whose cluster is empty (or carries zero weight) stay where they are.
pub fn lloyd_step(solution: &Solution, points: &[WeightedPoint]) -> Result<Solution> {
    check_dims(solution, points)?;
    Ok(lloyd_step_unchecked(solution, points))
}

fn lloyd_step_unchecked(solution: &Solution, points: &[WeightedPoint]) -> Solution {
    let k = solution.len();
    let dim = solution.dim();
    let mut sums = vec![0.0; k * dim];
    let mut mass = vec![0.0; k];
    for p in points {
        let (c, _) = nearest(solution.centers(), p.coords());
        mass[c] += p.weight;
        for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p.coords()) {
            *s += p.weight * x;
        }
    }
    let centers = solution
        .centers()
        .iter()
        .enumerate()
        .map(|(c, old)| {
            if mass[c] > 0.0 {
                Point::from_raw(sums[c * dim..(c + 1) * dim].iter().map(|s| s / mass[c]).collect())
            } else {
                old.clone()
            }
        })
        .collect();
    Solution::new(centers).expect("centers keep the solution dimension")
}

/// 2k-center bicriteria solution: k-means++ with `k' = 2k` and a Lloyd step.
pub fn bicriteria(points: &[WeightedPoint], k: usize, rng_seed: u64) -> Result<Solution> {
    let mut rng = rng_from_seed(rng_seed);
    bicriteria_with_rng(points, k, &mut rng)
}

pub fn bicriteria_with_rng<R: Rng + ?Sized>(
    points: &[WeightedPoint],
    k: usize,
    rng: &mut R,
) -> Result<Solution> {
    if k == 0 {
        return Err(config("k must be at least 1"));
    }
    kmeanspp_with_rng(points, 2 * k, true, rng)
}
