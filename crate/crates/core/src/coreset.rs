//! Static sensitivity-sampling coresets.
//!
//! A bicriteria solution `S` (2k centers) splits the input into clusters.
//! Each point gets the sensitivity
//!
//! ```text
//! sens(x) = w(x) * cost(x, S) / cost_w(X, S) + w(x) / w(S_x)
//! ```
//!
//! and `s` independent draws proportional to `sens` are kept with the
//! importance weight `w(x) * sum(sens) / (s * sens(x))`. Every center is then
//! added with weight `(1 + eps_w) * w(S_c) - (sampled weight in S_c)`, so each
//! cluster's mass is reproduced exactly. A negative center weight is clamped
//! to zero and the draws of that cluster are scaled down to its target mass,
//! so the output always carries exactly `(1 + eps_w) * w(X)`.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{config, Error, Result};
use crate::geometry::{nearest, Solution, WeightedPoint};
use crate::sampling::{rng_from_seed, CumulativeTable};
use crate::seeding::bicriteria_with_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoresetConfig {
    pub k: usize,
    /// Number of sampled points; also the pass-through threshold.
    pub s: usize,
    pub eps_w: f64,
    pub rng_seed: u64,
}

impl CoresetConfig {
    pub fn new(k: usize, s: usize, rng_seed: u64) -> Self {
        Self { k, s, eps_w: 0.0, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(config("k must be at least 1"));
        }
        if self.s <= self.k {
            return Err(config(format!("coreset size s = {} must exceed k = {}", self.s, self.k)));
        }
        if !(self.eps_w.is_finite() && self.eps_w >= 0.0) {
            return Err(config(format!("eps_w must be finite and >= 0, got {}", self.eps_w)));
        }
        Ok(())
    }
}

/// Weighted point multiset plus the total negative center weight that was
/// clamped to zero while producing it. The clamped excess is taken off the
/// sampled points rather than added to the total, so this is a diagnostic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Coreset {
    pub points: Vec<WeightedPoint>,
    pub clamped_mass: f64,
}

impl Coreset {
    pub fn exact(points: Vec<WeightedPoint>) -> Self {
        Self { points, clamped_mass: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }
}

/// Intermediate quantities of one sampling run, for auditing the weight
/// identities.
#[derive(Clone, Debug)]
pub struct SamplingTrace {
    pub bicriteria: Solution,
    /// `w(S_c)` per bicriteria cluster.
    pub cluster_mass: Vec<f64>,
    /// Cluster of each draw, in draw order.
    pub sample_cluster: Vec<usize>,
    /// Importance weight of each draw, in draw order.
    pub sample_weight: Vec<f64>,
    /// Center weights before clamping.
    pub raw_center_weight: Vec<f64>,
}

pub fn build_coreset(points: &[WeightedPoint], cfg: &CoresetConfig) -> Result<Coreset> {
    let mut rng = rng_from_seed(cfg.rng_seed);
    build_coreset_with_rng(points, cfg, &mut rng)
}

pub fn build_coreset_with_rng<R: Rng + ?Sized>(
    points: &[WeightedPoint],
    cfg: &CoresetConfig,
    rng: &mut R,
) -> Result<Coreset> {
    build_coreset_traced(points, cfg, rng).map(|(c, _)| c)
}

/// Like [`build_coreset_with_rng`], also returning the sampling trace when
/// sampling actually happened (not for pass-through or zero-cost inputs).
pub fn build_coreset_traced<R: Rng + ?Sized>(
    points: &[WeightedPoint],
    cfg: &CoresetConfig,
    rng: &mut R,
) -> Result<(Coreset, Option<SamplingTrace>)> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(crate::error::usage("coreset of an empty point set"));
    }
    if points.len() <= cfg.s {
        return Ok((Coreset::exact(points.to_vec()), None));
    }

    let bicriteria = bicriteria_with_rng(points, cfg.k, rng)?;
    let centers = bicriteria.centers();
    let n_centers = centers.len();

    let mut cluster = Vec::with_capacity(points.len());
    let mut d2 = Vec::with_capacity(points.len());
    let mut cluster_mass = vec![0.0; n_centers];
    let mut total_cost = 0.0;
    for p in points {
        let (c, d) = nearest(centers, p.coords());
        cluster.push(c);
        d2.push(d);
        cluster_mass[c] += p.weight;
        total_cost += p.weight * d;
    }

    if total_cost.is_nan() || total_cost <= 0.0 {
        return Ok((aggregate_distinct(points), None));
    }

    let sens: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mass = cluster_mass[cluster[i]];
            let spread = if mass > 0.0 { p.weight / mass } else { 0.0 };
            p.weight * d2[i] / total_cost + spread
        })
        .collect();
    let table = CumulativeTable::new(&sens);
    let sens_total = table.total();
    let draws = cfg.s as f64;

    let mut out = Vec::with_capacity(cfg.s + n_centers);
    let mut sampled_mass = vec![0.0; n_centers];
    let mut sample_cluster = Vec::with_capacity(cfg.s);
    let mut sample_weight = Vec::with_capacity(cfg.s);
    for _ in 0..cfg.s {
        let i = table.sample(rng);
        let w = points[i].weight * sens_total / (draws * sens[i]);
        sampled_mass[cluster[i]] += w;
        sample_cluster.push(cluster[i]);
        sample_weight.push(w);
        out.push(WeightedPoint { id: points[i].id, point: points[i].point.clone(), weight: w });
    }

    // A cluster whose draws already carry more than its target mass gets no
    // center record; its draws are scaled down to the target instead, so the
    // negative remainder is not silently added back as extra mass.
    let mut clamped_mass = 0.0;
    let mut raw_center_weight = Vec::with_capacity(n_centers);
    let mut rescale = vec![1.0; n_centers];
    for (c, center) in centers.iter().enumerate() {
        let target = (1.0 + cfg.eps_w) * cluster_mass[c];
        let raw = target - sampled_mass[c];
        raw_center_weight.push(raw);
        if raw > 0.0 {
            out.push(WeightedPoint::synthetic(center.clone(), raw));
        } else if raw < 0.0 {
            clamped_mass += -raw;
            rescale[c] = target / sampled_mass[c];
        }
    }
    for (p, &c) in out.iter_mut().zip(&sample_cluster) {
        p.weight *= rescale[c];
    }

    let trace = SamplingTrace {
        bicriteria,
        cluster_mass,
        sample_cluster,
        sample_weight,
        raw_center_weight,
    };
    Ok((Coreset { points: out, clamped_mass }, Some(trace)))
}

/// Exact representation of a set with at most 2k distinct locations: one
/// record per distinct coordinate vector carrying the summed weight. Keeps
/// the id of the first occurrence.
fn aggregate_distinct(points: &[WeightedPoint]) -> Coreset {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out: Vec<WeightedPoint> = Vec::new();
    for p in points {
        let key: Vec<u64> = p.coords().iter().map(|c| c.to_bits()).collect();
        match index.get(&key) {
            Some(&j) => out[j].weight += p.weight,
            None => {
                index.insert(key, out.len());
                out.push(p.clone());
            }
        }
    }
    Coreset::exact(out)
}

/// Multiset union; weights are untouched and clamped masses add up.
pub fn merge(a: &Coreset, b: &Coreset) -> Result<Coreset> {
    if let (Some(x), Some(y)) = (a.points.first(), b.points.first()) {
        if x.dim() != y.dim() {
            return Err(Error::Shape { expected: x.dim(), found: y.dim() });
        }
    }
    let mut points = Vec::with_capacity(a.len() + b.len());
    points.extend_from_slice(&a.points);
    points.extend_from_slice(&b.points);
    Ok(Coreset { points, clamped_mass: a.clamped_mass + b.clamped_mass })
}
