//! Fully dynamic coreset maintenance over a balanced binary tree.
//!
//! Leaves hold the input points (between `s/2` and `s` each, except one
//! special leaf that receives all insertions). Every inner node keeps a
//! coreset of the union of its children's coresets; a point update therefore
//! only recomputes the leaf-to-root path. Two optional optimizations sit on
//! top of the base scheme:
//!
//! * insertion epochs: an inner node keeps its coreset from the start of the
//!   epoch plus a verbatim buffer of points inserted since, and only
//!   recomputes once `s` points were inserted below it;
//! * lazy deletions: a deleted point that is not part of the root coreset is
//!   only marked, until a cut-off fraction `delta` of the live points is
//!   marked or a marked point's subtree is rebuilt anyway.
//!
//! All recomputations go through one dirty-set pass that rebuilds every
//! affected node exactly once, deepest first.

mod audit;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::coreset::{build_coreset_with_rng, Coreset, CoresetConfig};
use crate::error::{config, usage, Error, Result};
use crate::geometry::{PointId, WeightedPoint};
use crate::sampling::{derive_seed, rng_from_seed, CoreRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynTreeConfig {
    pub k: usize,
    /// Leaf capacity and per-node coreset size.
    pub s: usize,
    /// Deletion cut-off: at most `ceil(delta * n)` points stay marked.
    pub delta: f64,
    pub insertion_epochs: bool,
    pub lazy_deletes: bool,
    pub eps_w: f64,
    pub rng_seed: u64,
}

impl DynTreeConfig {
    /// The base algorithm: every update recomputes its whole path.
    pub fn plain(k: usize, s: usize, rng_seed: u64) -> Self {
        Self {
            k,
            s,
            delta: 0.0,
            insertion_epochs: false,
            lazy_deletes: false,
            eps_w: 0.0,
            rng_seed,
        }
    }

    /// Epochs and lazy deletions enabled.
    pub fn optimized(k: usize, s: usize, delta: f64, rng_seed: u64) -> Self {
        Self {
            delta,
            insertion_epochs: true,
            lazy_deletes: true,
            ..Self::plain(k, s, rng_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.coreset_config().validate()?;
        if self.s < 2 {
            return Err(config("s must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(config(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        Ok(())
    }

    fn coreset_config(&self) -> CoresetConfig {
        CoresetConfig { k: self.k, s: self.s, eps_w: self.eps_w, rng_seed: self.rng_seed }
    }
}

/// Event counters. `node_rebuilds` counts every node whose maintained set was
/// recomputed, leaves included.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynTreeStats {
    pub node_rebuilds: u64,
    pub epoch_starts: u64,
    pub phase_rebuilds: u64,
    /// Deletions that ran the base removal procedure.
    pub delete_recomputes: u64,
    /// Recomputes forced because the marked set hit the cut-off.
    pub threshold_flushes: u64,
    /// Recomputes forced because the deleted point was in the root coreset.
    pub root_hit_flushes: u64,
    pub lazy_marks: u64,
    /// Marked points removed while rebuilding a node after an insertion.
    pub marked_purged: u64,
    pub leaf_splits: u64,
    pub leaf_removals: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf {
        points: Vec<WeightedPoint>,
    },
    Inner {
        children: [NodeId; 2],
        base: Vec<WeightedPoint>,
        buffer: Vec<WeightedPoint>,
    },
}

#[derive(Clone, Debug)]
struct Node {
    parent: Option<NodeId>,
    depth: usize,
    epoch_inserts: usize,
    /// Clamped center mass folded into this node's maintained set, summed
    /// over the whole subtree.
    clamped: f64,
    kind: NodeKind,
}

impl Node {
    fn leaf(parent: Option<NodeId>, depth: usize, points: Vec<WeightedPoint>) -> Self {
        Self { parent, depth, epoch_inserts: 0, clamped: 0.0, kind: NodeKind::Leaf { points } }
    }

    fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    fn maintained(&self) -> impl Iterator<Item = &WeightedPoint> {
        let (a, b): (&[WeightedPoint], &[WeightedPoint]) = match &self.kind {
            NodeKind::Leaf { points } => (points, &[]),
            NodeKind::Inner { base, buffer, .. } => (base, buffer),
        };
        a.iter().chain(b.iter())
    }

    fn maintained_len(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf { points } => points.len(),
            NodeKind::Inner { base, buffer, .. } => base.len() + buffer.len(),
        }
    }
}

pub struct DynTree {
    cfg: DynTreeConfig,
    nodes: Vec<Option<Node>>,
    free: Vec<usize>,
    root: NodeId,
    special: Option<NodeId>,
    live: HashMap<PointId, NodeId>,
    marked: BTreeSet<PointId>,
    phase_start_size: usize,
    dim: Option<usize>,
    rng: CoreRng,
    /// Bumped on every mutation; seeds the read-time root reduction.
    version: u64,
    stats: DynTreeStats,
}

impl DynTree {
    pub fn new(cfg: DynTreeConfig) -> Result<Self> {
        cfg.validate()?;
        let mut tree = Self {
            cfg,
            nodes: Vec::new(),
            free: Vec::new(),
            root: NodeId(0),
            special: None,
            live: HashMap::new(),
            marked: BTreeSet::new(),
            phase_start_size: 0,
            dim: None,
            rng: rng_from_seed(cfg.rng_seed),
            version: 0,
            stats: DynTreeStats::default(),
        };
        let root = tree.alloc(Node::leaf(None, 0, Vec::new()));
        tree.root = root;
        tree.special = Some(root);
        Ok(tree)
    }

    pub fn config(&self) -> &DynTreeConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &DynTreeStats {
        &self.stats
    }

    /// Number of live points, marked ones included.
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.live.contains_key(&id)
    }

    pub fn is_marked(&self, id: PointId) -> bool {
        self.marked.contains(&id)
    }

    pub fn marked_len(&self) -> usize {
        self.marked.len()
    }

    pub fn phase_start_size(&self) -> usize {
        self.phase_start_size
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn leaf_of(&self, id: PointId) -> Option<NodeId> {
        self.live.get(&id).copied()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves_in_order().len()
    }

    /// Maximum leaf depth (root has depth 0).
    pub fn height(&self) -> usize {
        self.leaves_in_order()
            .iter()
            .map(|&l| self.node(l).depth)
            .max()
            .unwrap_or(0)
    }

    pub fn insert(&mut self, p: WeightedPoint) -> Result<()> {
        if self.live.contains_key(&p.id) {
            return Err(usage(format!("point {} is already live", p.id)));
        }
        if p.id.is_synthetic() {
            return Err(usage("point id u64::MAX is reserved"));
        }
        match self.dim {
            Some(d) if d != p.dim() => return Err(Error::Shape { expected: d, found: p.dim() }),
            _ => self.dim = Some(p.dim()),
        }
        self.version += 1;

        let mut touched = Vec::new();
        let leaf = match self.special {
            Some(l) => l,
            None => self.split_leaf(&mut touched),
        };
        self.live.insert(p.id, leaf);
        if let NodeKind::Leaf { points } = &mut self.node_mut(leaf).kind {
            points.push(p.clone());
        }
        self.close_special_if_full();

        if self.cfg.insertion_epochs {
            if let Some(u) = self.buffer_insert(leaf, &p) {
                self.stats.epoch_starts += 1;
                touched.push(u);
            }
        } else {
            touched.push(leaf);
        }
        // Any recomputation cascades to the root, which represents every
        // marked point, so all of them are purged first.
        if !touched.is_empty() && !self.marked.is_empty() {
            self.purge_marked(&mut touched);
        }
        self.flush(touched);
        self.close_special_if_full();
        self.check_phase();
        Ok(())
    }

    pub fn delete(&mut self, id: PointId) -> Result<()> {
        if !self.live.contains_key(&id) {
            return Err(usage(format!("point {id} is not live")));
        }
        if self.marked.contains(&id) {
            return Ok(());
        }
        self.version += 1;

        let mut ids = vec![id];
        if self.cfg.lazy_deletes && self.cfg.delta > 0.0 {
            let cutoff = (self.cfg.delta * self.live.len() as f64).ceil() as usize;
            let in_root = self.node(self.root).maintained().any(|q| q.id == id);
            if !in_root && self.marked.len() < cutoff {
                self.marked.insert(id);
                self.stats.lazy_marks += 1;
                return Ok(());
            }
            if in_root {
                self.stats.root_hit_flushes += 1;
            } else {
                self.stats.threshold_flushes += 1;
            }
            ids.extend(std::mem::take(&mut self.marked));
        }
        self.stats.delete_recomputes += 1;
        let mut touched = Vec::new();
        self.remove_points(&ids, &mut touched);
        self.flush(touched);
        self.check_phase();
        Ok(())
    }

    /// Coreset of the current dataset: the root's maintained set with marked
    /// points filtered out. When the epoch buffer pushes it past `s + 2k`
    /// points it is reduced once more, deterministically per tree version.
    pub fn root_coreset(&self) -> Coreset {
        let root = self.node(self.root);
        let points: Vec<WeightedPoint> = root
            .maintained()
            .filter(|p| !self.marked.contains(&p.id))
            .cloned()
            .collect();
        let mut out = Coreset { points, clamped_mass: root.clamped };
        if out.len() > self.cfg.s + 2 * self.cfg.k {
            let mut rng = rng_from_seed(derive_seed(self.cfg.rng_seed, self.version));
            let reduced = build_coreset_with_rng(&out.points, &self.cfg.coreset_config(), &mut rng)
                .expect("validated config and nonempty input");
            out = Coreset {
                points: reduced.points,
                clamped_mass: out.clamped_mass + reduced.clamped_mass,
            };
        }
        out
    }

    /// Recomputes `node` and all its ancestors.
    pub fn update_inner_coreset(&mut self, node: NodeId) {
        self.flush(vec![node]);
    }

    /// Rebuilds the whole tree from the live, unmarked points and starts a
    /// new phase.
    pub fn start_phase(&mut self) {
        self.version += 1;
        let mut points = Vec::with_capacity(self.live.len());
        for leaf in self.leaves_in_order() {
            if let NodeKind::Leaf { points: pts } = &self.node(leaf).kind {
                points.extend(pts.iter().filter(|p| !self.marked.contains(&p.id)).cloned());
            }
        }
        for id in std::mem::take(&mut self.marked) {
            self.live.remove(&id);
        }

        self.nodes.clear();
        self.free.clear();
        self.live.clear();
        let s = self.cfg.s;
        let mut leaves = Vec::new();
        let mut rest = points.as_slice();
        while !rest.is_empty() {
            let take = rest.len().min(s);
            let leaf = self.alloc(Node::leaf(None, 0, rest[..take].to_vec()));
            for p in &rest[..take] {
                self.live.insert(p.id, leaf);
            }
            leaves.push(leaf);
            rest = &rest[take..];
        }
        self.special = match leaves.last() {
            None => {
                let leaf = self.alloc(Node::leaf(None, 0, Vec::new()));
                leaves.push(leaf);
                Some(leaf)
            }
            Some(&last) if self.leaf_len(last) < s => Some(last),
            Some(_) => None,
        };
        self.root = self.build_balanced(&leaves, None, 0);

        let mut all: Vec<NodeId> = self.live_node_ids().collect();
        all.sort_by_key(|&n| (std::cmp::Reverse(self.node(n).depth), n));
        for n in all {
            self.rebuild_node(n);
        }
        self.phase_start_size = self.live.len();
        self.stats.phase_rebuilds += 1;
    }

    // ---- structure ------------------------------------------------------

    fn alloc(&mut self, node: Node) -> NodeId {
        match self.free.pop() {
            Some(i) => {
                self.nodes[i] = Some(node);
                NodeId(i)
            }
            None => {
                self.nodes.push(Some(node));
                NodeId(self.nodes.len() - 1)
            }
        }
    }

    fn release(&mut self, id: NodeId) {
        self.nodes[id.0] = None;
        self.free.push(id.0);
    }

    fn node(&self, id: NodeId) -> &Node {
        self.nodes[id.0].as_ref().expect("live node")
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id.0].as_mut().expect("live node")
    }

    fn is_alive(&self, id: NodeId) -> bool {
        self.nodes.get(id.0).is_some_and(|n| n.is_some())
    }

    fn live_node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_some())
            .map(|(i, _)| NodeId(i))
    }

    fn children(&self, id: NodeId) -> Option<[NodeId; 2]> {
        match &self.node(id).kind {
            NodeKind::Inner { children, .. } => Some(*children),
            NodeKind::Leaf { .. } => None,
        }
    }

    fn leaf_len(&self, id: NodeId) -> usize {
        match &self.node(id).kind {
            NodeKind::Leaf { points } => points.len(),
            NodeKind::Inner { .. } => 0,
        }
    }

    fn leaves_in_order(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            match self.children(n) {
                Some([l, r]) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(n),
            }
        }
        out
    }

    fn build_balanced(&mut self, leaves: &[NodeId], parent: Option<NodeId>, depth: usize) -> NodeId {
        if leaves.len() == 1 {
            let leaf = self.node_mut(leaves[0]);
            leaf.parent = parent;
            leaf.depth = depth;
            return leaves[0];
        }
        let id = self.alloc(Node {
            parent,
            depth,
            epoch_inserts: 0,
            clamped: 0.0,
            kind: NodeKind::Leaf { points: Vec::new() },
        });
        let mid = leaves.len().div_ceil(2);
        let left = self.build_balanced(&leaves[..mid], Some(id), depth + 1);
        let right = self.build_balanced(&leaves[mid..], Some(id), depth + 1);
        self.node_mut(id).kind = NodeKind::Inner {
            children: [left, right],
            base: Vec::new(),
            buffer: Vec::new(),
        };
        id
    }

    fn replace_child(&mut self, parent: Option<NodeId>, old: NodeId, new: NodeId) {
        match parent {
            None => self.root = new,
            Some(p) => {
                if let NodeKind::Inner { children, .. } = &mut self.node_mut(p).kind {
                    for c in children.iter_mut() {
                        if *c == old {
                            *c = new;
                        }
                    }
                }
            }
        }
    }

    /// Creates a fresh special leaf next to the leftmost shallowest leaf `l`:
    /// a new inner node takes `l`'s place with children `l` and the new leaf.
    fn split_leaf(&mut self, touched: &mut Vec<NodeId>) -> NodeId {
        let leaves = self.leaves_in_order();
        let min_depth = leaves.iter().map(|&l| self.node(l).depth).min().unwrap_or(0);
        let l = *leaves
            .iter()
            .find(|&&l| self.node(l).depth == min_depth)
            .expect("tree has a leaf");
        let (parent, depth) = {
            let n = self.node(l);
            (n.parent, n.depth)
        };
        let inner = self.alloc(Node {
            parent,
            depth,
            epoch_inserts: 0,
            clamped: 0.0,
            kind: NodeKind::Leaf { points: Vec::new() },
        });
        let fresh = self.alloc(Node::leaf(Some(inner), depth + 1, Vec::new()));
        self.replace_child(parent, l, inner);
        {
            let n = self.node_mut(l);
            n.parent = Some(inner);
            n.depth = depth + 1;
        }
        self.node_mut(inner).kind = NodeKind::Inner {
            children: [l, fresh],
            base: Vec::new(),
            buffer: Vec::new(),
        };
        self.special = Some(fresh);
        self.stats.leaf_splits += 1;
        touched.push(inner);
        fresh
    }

    fn close_special_if_full(&mut self) {
        if let Some(sp) = self.special {
            if self.leaf_len(sp) >= self.cfg.s {
                self.special = None;
            }
        }
    }

    /// Appends `p` to the epoch buffers above `leaf` and returns the lowest
    /// node on the path whose epoch is now over.
    fn buffer_insert(&mut self, leaf: NodeId, p: &WeightedPoint) -> Option<NodeId> {
        let s = self.cfg.s;
        let mut trigger = None;
        let n = self.node_mut(leaf);
        n.epoch_inserts += 1;
        if n.epoch_inserts >= s {
            trigger = Some(leaf);
        }
        let mut cur = n.parent;
        while let Some(v) = cur {
            let node = self.node_mut(v);
            node.epoch_inserts += 1;
            if let NodeKind::Inner { buffer, .. } = &mut node.kind {
                buffer.push(p.clone());
            }
            if trigger.is_none() && node.epoch_inserts >= s {
                trigger = Some(v);
            }
            cur = node.parent;
        }
        trigger
    }

    fn is_ancestor_or_self(&self, anc: NodeId, mut node: NodeId) -> bool {
        loop {
            if node == anc {
                return true;
            }
            match self.node(node).parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    fn purge_marked(&mut self, touched: &mut Vec<NodeId>) {
        let ids: Vec<PointId> = std::mem::take(&mut self.marked).into_iter().collect();
        self.stats.marked_purged += ids.len() as u64;
        self.remove_points(&ids, touched);
    }

    /// Removes points from their leaves, then retires leaves that fell to
    /// `s/2` points or fewer.
    fn remove_points(&mut self, ids: &[PointId], touched: &mut Vec<NodeId>) {
        let mut leaves = BTreeSet::new();
        for id in ids {
            let leaf = self.live.remove(id).expect("id is live");
            self.marked.remove(id);
            if let NodeKind::Leaf { points } = &mut self.node_mut(leaf).kind {
                let pos = points.iter().position(|p| p.id == *id).expect("point in its leaf");
                points.remove(pos);
            }
            leaves.insert(leaf);
        }
        for leaf in leaves {
            if !self.is_alive(leaf) || !self.node(leaf).is_leaf() {
                continue;
            }
            if Some(leaf) != self.special && 2 * self.leaf_len(leaf) <= self.cfg.s {
                self.retire_leaf(leaf, touched);
            } else {
                touched.push(leaf);
            }
        }
    }

    fn retire_leaf(&mut self, v: NodeId, touched: &mut Vec<NodeId>) {
        if self.special.is_none() {
            self.special = Some(v);
            touched.push(v);
            return;
        }
        let points = match &mut self.node_mut(v).kind {
            NodeKind::Leaf { points } => std::mem::take(points),
            NodeKind::Inner { .. } => unreachable!("retire_leaf on inner node"),
        };
        self.detach_leaf(v, touched);
        self.stats.leaf_removals += 1;

        for p in points {
            self.close_special_if_full();
            let sp = match self.special {
                Some(sp) => sp,
                None => self.split_leaf(touched),
            };
            self.live.insert(p.id, sp);
            if let NodeKind::Leaf { points } = &mut self.node_mut(sp).kind {
                points.push(p);
            }
            touched.push(sp);
        }
        self.close_special_if_full();
    }

    /// Swaps `v` with the rightmost deepest leaf, then lifts its sibling into
    /// the parent's slot.
    fn detach_leaf(&mut self, v: NodeId, touched: &mut Vec<NodeId>) {
        let leaves = self.leaves_in_order();
        let max_depth = leaves.iter().map(|&l| self.node(l).depth).max().unwrap_or(0);
        let r = *leaves
            .iter()
            .rev()
            .find(|&&l| self.node(l).depth == max_depth)
            .expect("tree has a leaf");
        if r != v {
            self.swap_positions(v, r);
            touched.push(r);
        }
        let parent = self.node(v).parent.expect("retired leaf is not the root");
        let [a, b] = self.children(parent).expect("parent is inner");
        let sibling = if a == v { b } else { a };
        let grand = self.node(parent).parent;
        self.replace_child(grand, parent, sibling);
        self.node_mut(sibling).parent = grand;
        self.shift_depth(sibling);
        self.release(v);
        self.release(parent);
        touched.push(sibling);
    }

    fn shift_depth(&mut self, top: NodeId) {
        let mut stack = vec![top];
        while let Some(n) = stack.pop() {
            let node = self.node_mut(n);
            node.depth -= 1;
            if let NodeKind::Inner { children, .. } = &node.kind {
                stack.extend_from_slice(children);
            }
        }
    }

    fn swap_positions(&mut self, a: NodeId, b: NodeId) {
        let (pa, da) = (self.node(a).parent, self.node(a).depth);
        let (pb, db) = (self.node(b).parent, self.node(b).depth);
        if pa == pb {
            if let Some(p) = pa {
                if let NodeKind::Inner { children, .. } = &mut self.node_mut(p).kind {
                    children.swap(0, 1);
                }
            }
            return;
        }
        self.replace_child(pa, a, b);
        self.replace_child(pb, b, a);
        {
            let n = self.node_mut(a);
            n.parent = pb;
            n.depth = db;
        }
        let n = self.node_mut(b);
        n.parent = pa;
        n.depth = da;
    }

    // ---- recomputation --------------------------------------------------

    /// Rebuilds every touched node and all of its ancestors, once each,
    /// deepest first.
    fn flush(&mut self, touched: Vec<NodeId>) {
        let mut dirty = BTreeSet::new();
        for t in touched {
            let mut cur = Some(t);
            while let Some(n) = cur {
                if !self.is_alive(n) || !dirty.insert(n) {
                    break;
                }
                cur = self.node(n).parent;
            }
        }
        let mut order: Vec<NodeId> = dirty.into_iter().collect();
        order.sort_by_key(|&n| (std::cmp::Reverse(self.node(n).depth), n));
        for n in order {
            self.rebuild_node(n);
        }
    }

    fn rebuild_node(&mut self, id: NodeId) {
        self.stats.node_rebuilds += 1;
        let Some([a, b]) = self.children(id) else {
            let n = self.node_mut(id);
            n.epoch_inserts = 0;
            n.clamped = 0.0;
            return;
        };
        let (na, nb) = (self.node(a), self.node(b));
        let mut clamped = na.clamped + nb.clamped;
        let mut input = Vec::with_capacity(na.maintained_len() + nb.maintained_len());
        input.extend(na.maintained().cloned());
        input.extend(nb.maintained().cloned());

        let base = if input.len() <= self.cfg.s {
            input
        } else {
            let cs = build_coreset_with_rng(&input, &self.cfg.coreset_config(), &mut self.rng)
                .expect("validated config and nonempty input");
            clamped += cs.clamped_mass;
            cs.points
        };
        let n = self.node_mut(id);
        n.epoch_inserts = 0;
        n.clamped = clamped;
        if let NodeKind::Inner { base: b, buffer, .. } = &mut n.kind {
            *b = base;
            buffer.clear();
        }
    }

    fn check_phase(&mut self) {
        let n = self.live.len();
        let n0 = self.phase_start_size;
        let grew = 2 * n > 3 * n0.max(self.cfg.s);
        let shrank = 3 * n < 2 * n0;
        if grew || shrank {
            self.start_phase();
        }
    }
}

#[cfg(test)]
mod tests;
