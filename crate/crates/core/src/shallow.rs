//! Fixed-height g-ary merge-and-reduce tree.
//!
//! Points are routed to one of `g^h` leaves by a hash of their id, so no
//! restructuring ever happens. Every update recomputes the coresets on the
//! leaf-to-root path, which costs `h + 1` node rebuilds. The shape is only
//! efficient while the dataset size stays close to `n_hint`; once it drifts
//! further than a factor 1.5 the structure refuses updates with
//! [`Error::RebuildRequired`] until [`ShallowTree::rebuild`] is called.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coreset::{build_coreset_with_rng, Coreset, CoresetConfig};
use crate::error::{config, usage, Error, Result};
use crate::geometry::{PointId, WeightedPoint};
use crate::sampling::{derive_seed, rng_from_seed, CoreRng};

/// Arity balancing leaf work against inner-node work:
/// `round((n / s)^(1 / (h + 1)))`, at least 1.
pub fn optimal_g(n: usize, s: usize, h: usize) -> usize {
    if s == 0 || h == 0 {
        return 1;
    }
    let ratio = n as f64 / s as f64;
    (ratio.powf(1.0 / (h as f64 + 1.0)).round() as usize).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShallowConfig {
    pub h: usize,
    pub g: usize,
    pub n_hint: usize,
    pub k: usize,
    pub s: usize,
    pub rng_seed: u64,
}

impl ShallowConfig {
    /// Uses the optimal arity for `n_hint`, raised to 2 if needed.
    pub fn auto(h: usize, n_hint: usize, k: usize, s: usize, rng_seed: u64) -> Self {
        let g = optimal_g(n_hint, s, h).max(2);
        Self { h, g, n_hint, k, s, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.g < 2 {
            return Err(config(format!("need h >= 1 and g >= 2, got h = {}, g = {}", self.h, self.g)));
        }
        let leaves = self.leaf_count().ok_or_else(|| config("g^h overflows"))?;
        if self.n_hint < leaves {
            return Err(config(format!("n_hint = {} is below the leaf count {leaves}", self.n_hint)));
        }
        self.coreset_config().validate()
    }

    pub fn leaf_count(&self) -> Option<usize> {
        self.g.checked_pow(u32::try_from(self.h).ok()?)
    }

    fn coreset_config(&self) -> CoresetConfig {
        CoresetConfig::new(self.k, self.s, self.rng_seed)
    }

    fn size_range(&self) -> (usize, usize) {
        let lo = (self.n_hint as f64 / 1.5).ceil() as usize;
        let hi = (self.n_hint as f64 * 1.5).floor() as usize;
        (lo, hi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShallowStats {
    pub node_rebuilds: u64,
    pub full_rebuilds: u64,
}

pub struct ShallowTree {
    cfg: ShallowConfig,
    leaves: Vec<Vec<WeightedPoint>>,
    /// `levels[l]` holds the `g^l` node coresets of depth `l`; the last
    /// level belongs to the leaves.
    levels: Vec<Vec<Coreset>>,
    leaf_of: HashMap<PointId, usize>,
    dim: Option<usize>,
    /// The lower size bound only applies once the structure has been filled.
    filled: bool,
    rng: CoreRng,
    stats: ShallowStats,
}

impl ShallowTree {
    pub fn new(cfg: ShallowConfig) -> Result<Self> {
        cfg.validate()?;
        let mut tree = Self {
            cfg,
            leaves: Vec::new(),
            levels: Vec::new(),
            leaf_of: HashMap::new(),
            dim: None,
            filled: false,
            rng: rng_from_seed(cfg.rng_seed),
            stats: ShallowStats::default(),
        };
        tree.allocate();
        Ok(tree)
    }

    pub fn config(&self) -> &ShallowConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &ShallowStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaf_of.is_empty()
    }

    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.leaves.iter().map(Vec::len).collect()
    }

    fn allocate(&mut self) {
        let g = self.cfg.g;
        let leaves = self.cfg.leaf_count().expect("validated");
        self.leaves = vec![Vec::new(); leaves];
        self.levels = (0..=self.cfg.h).map(|l| vec![Coreset::default(); g.pow(l as u32)]).collect();
    }

    fn route(&self, id: PointId) -> usize {
        (derive_seed(self.cfg.rng_seed, id.0) % self.leaves.len() as u64) as usize
    }

    fn check_size(&self, next: usize) -> Result<()> {
        let (lo, hi) = self.cfg.size_range();
        if next > hi || (self.filled && next < lo) {
            return Err(Error::RebuildRequired { size: next, n_hint: self.cfg.n_hint });
        }
        Ok(())
    }

    pub fn insert(&mut self, p: WeightedPoint) -> Result<()> {
        if self.leaf_of.contains_key(&p.id) {
            return Err(usage(format!("point {} is already present", p.id)));
        }
        if let Some(d) = self.dim {
            if p.dim() != d {
                return Err(Error::Shape { expected: d, found: p.dim() });
            }
        }
        self.check_size(self.len() + 1)?;
        self.dim = Some(p.dim());
        let leaf = self.route(p.id);
        self.leaf_of.insert(p.id, leaf);
        self.leaves[leaf].push(p);
        if self.len() >= self.cfg.size_range().0 {
            self.filled = true;
        }
        self.update_path(leaf);
        Ok(())
    }

    pub fn delete(&mut self, id: PointId) -> Result<()> {
        let Some(&leaf) = self.leaf_of.get(&id) else {
            return Err(usage(format!("point {id} is not present")));
        };
        self.check_size(self.len() - 1)?;
        self.leaf_of.remove(&id);
        let points = &mut self.leaves[leaf];
        let pos = points.iter().position(|p| p.id == id).expect("id map is consistent");
        points.swap_remove(pos);
        self.update_path(leaf);
        Ok(())
    }

    pub fn root_coreset(&self) -> Coreset {
        self.levels[0][0].clone()
    }

    /// Re-shapes the tree for a new size hint (arity re-derived for the
    /// current height) and recomputes every node.
    pub fn rebuild(&mut self, n_hint: usize) -> Result<()> {
        let cfg = ShallowConfig::auto(self.cfg.h, n_hint, self.cfg.k, self.cfg.s, self.cfg.rng_seed);
        cfg.validate()?;
        let points: Vec<WeightedPoint> = self.leaves.drain(..).flatten().collect();
        self.cfg = cfg;
        self.allocate();
        self.leaf_of.clear();
        for p in points {
            let leaf = self.route(p.id);
            self.leaf_of.insert(p.id, leaf);
            self.leaves[leaf].push(p);
        }
        self.filled = self.len() >= cfg.size_range().0;
        self.stats.full_rebuilds += 1;
        for leaf in 0..self.leaves.len() {
            self.rebuild_leaf(leaf);
        }
        for level in (0..self.cfg.h).rev() {
            for i in 0..self.levels[level].len() {
                self.rebuild_inner(level, i);
            }
        }
        Ok(())
    }

    fn update_path(&mut self, leaf: usize) {
        self.rebuild_leaf(leaf);
        let mut i = leaf;
        for level in (0..self.cfg.h).rev() {
            i /= self.cfg.g;
            self.rebuild_inner(level, i);
        }
    }

    fn reduce(&mut self, input: Vec<WeightedPoint>, inherited: f64) -> Coreset {
        if input.len() <= self.cfg.s {
            return Coreset { points: input, clamped_mass: inherited };
        }
        let mut cs = build_coreset_with_rng(&input, &self.cfg.coreset_config(), &mut self.rng)
            .expect("validated config and nonempty input");
        cs.clamped_mass += inherited;
        cs
    }

    fn rebuild_leaf(&mut self, leaf: usize) {
        self.stats.node_rebuilds += 1;
        let input = self.leaves[leaf].clone();
        let cs = self.reduce(input, 0.0);
        self.levels[self.cfg.h][leaf] = cs;
    }

    fn rebuild_inner(&mut self, level: usize, i: usize) {
        self.stats.node_rebuilds += 1;
        let g = self.cfg.g;
        let children = &self.levels[level + 1][i * g..(i + 1) * g];
        let inherited = children.iter().map(|c| c.clamped_mass).sum();
        let input: Vec<WeightedPoint> = children.iter().flat_map(|c| c.points.iter().cloned()).collect();
        let cs = self.reduce(input, inherited);
        self.levels[level][i] = cs;
    }
}
