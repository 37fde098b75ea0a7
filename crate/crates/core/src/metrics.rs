//! Coreset distortion and solution quality.
//!
//! Neither metric is certified: distortion is a maximum over a finite set
//! of candidate solutions, by default one k-means++ solution computed on the
//! coreset and one computed on the full data.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::geometry::{cost, Solution, WeightedPoint};
use crate::seeding::{kmeanspp, SeedingConfig};

/// `max(a/b, b/a)`, with `1` for two zero costs and `+inf` for one.
fn two_sided_ratio(a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (true, true) => (a / b).max(b / a),
        (false, false) => 1.0,
        _ => f64::INFINITY,
    }
}

/// `max over S of max(cost(S,X)/cost(S,C), cost(S,C)/cost(S,X)) - 1`.
pub fn distortion(c: &[WeightedPoint], x: &[WeightedPoint], solutions: &[Solution]) -> Result<f64> {
    if solutions.is_empty() {
        return Err(usage("distortion needs at least one solution"));
    }
    let mut worst: f64 = 1.0;
    for s in solutions {
        worst = worst.max(two_sided_ratio(cost(s, x)?, cost(s, c)?));
    }
    Ok(worst - 1.0)
}

fn seeded(points: &[WeightedPoint], k: usize, seed: u64) -> Result<Solution> {
    kmeanspp(points, &SeedingConfig::new(k, seed))
}

/// k-means++ solutions on the coreset and on the full data, in that order.
pub fn default_solutions(c: &[WeightedPoint], x: &[WeightedPoint], k: usize, seed: u64) -> Result<Vec<Solution>> {
    Ok(vec![seeded(c, k, seed)?, seeded(x, k, seed)?])
}

/// `cost(S_X, X) / cost(S_C, X)`; not clamped, it may exceed 1.
pub fn quality(c: &[WeightedPoint], x: &[WeightedPoint], k: usize, seed: u64) -> Result<f64> {
    let sols = default_solutions(c, x, k, seed)?;
    Ok(quality_ratio(cost(&sols[1], x)?, cost(&sols[0], x)?))
}

fn quality_ratio(full: f64, from_coreset: f64) -> f64 {
    match (full > 0.0, from_coreset > 0.0) {
        (_, true) => full / from_coreset,
        (false, false) => 1.0,
        (true, false) => f64::INFINITY,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionCosts {
    #[serde(with = "crate::serde_float")]
    pub on_full: f64,
    #[serde(with = "crate::serde_float")]
    pub on_coreset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(with = "crate::serde_float")]
    pub distortion: f64,
    #[serde(with = "crate::serde_float")]
    pub quality: f64,
    /// Costs of the coreset solution and the full-data solution.
    pub solution_costs: Vec<SolutionCosts>,
}

/// Distortion over the default solutions plus quality, sharing the two
/// k-means++ runs. `solution` replaces the coreset-side solution when the
/// caller already computed it.
pub fn evaluate(
    c: &[WeightedPoint],
    x: &[WeightedPoint],
    k: usize,
    seed: u64,
    solution: Option<&Solution>,
) -> Result<EvalReport> {
    if c.is_empty() || x.is_empty() {
        return Err(usage("evaluation needs a nonempty coreset and dataset"));
    }
    let s_c = match solution {
        Some(s) => s.clone(),
        None => seeded(c, k, seed)?,
    };
    let s_x = seeded(x, k, seed)?;
    let mut solution_costs = Vec::with_capacity(2);
    let mut worst: f64 = 1.0;
    for s in [&s_c, &s_x] {
        let costs = SolutionCosts { on_full: cost(s, x)?, on_coreset: cost(s, c)? };
        worst = worst.max(two_sided_ratio(costs.on_full, costs.on_coreset));
        solution_costs.push(costs);
    }
    let quality = quality_ratio(solution_costs[1].on_full, solution_costs[0].on_full);
    Ok(EvalReport { distortion: worst - 1.0, quality, solution_costs })
}
