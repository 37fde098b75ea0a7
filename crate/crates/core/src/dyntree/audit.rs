//! Full structural audit, used by the tests after every operation.

use std::collections::HashSet;

use super::{DynTree, NodeId, NodeKind};

/// Relative tolerance for the weight ledger.
const LEDGER_TOL: f64 = 1e-9;

impl DynTree {
    /// Walks the whole tree and checks every maintained invariant:
    /// parent links and depths, leaf depth balance, leaf fill bounds,
    /// the id ledger, epoch buffers, root coreset size, the weight ledger
    /// and that no marked point is reported.
    pub fn audit(&self) -> Result<(), String> {
        let s = self.cfg.s;
        let mut seen_ids = HashSet::new();
        let mut leaf_depths = Vec::new();
        let mut stack: Vec<(NodeId, Option<NodeId>, usize)> = vec![(self.root, None, 0)];
        let mut reachable = 0usize;

        while let Some((id, parent, depth)) = stack.pop() {
            reachable += 1;
            let node = self.node(id);
            if node.parent != parent {
                return Err(format!("{id:?}: parent link {:?}, expected {parent:?}", node.parent));
            }
            if node.depth != depth {
                return Err(format!("{id:?}: depth {} but sits at {depth}", node.depth));
            }
            match &node.kind {
                NodeKind::Leaf { points } => {
                    leaf_depths.push(depth);
                    let special = Some(id) == self.special;
                    if points.len() > s || (special && points.len() >= s) {
                        return Err(format!("{id:?}: leaf overfull ({} points)", points.len()));
                    }
                    if !special && 2 * points.len() <= s {
                        return Err(format!("{id:?}: normal leaf underfull ({} points)", points.len()));
                    }
                    for p in points {
                        if self.live.get(&p.id) != Some(&id) {
                            return Err(format!("point {} not mapped to its leaf {id:?}", p.id));
                        }
                        if !seen_ids.insert(p.id) {
                            return Err(format!("point {} stored twice", p.id));
                        }
                    }
                }
                NodeKind::Inner { children, buffer, .. } => {
                    if self.cfg.insertion_epochs {
                        if node.epoch_inserts >= s || buffer.len() != node.epoch_inserts {
                            return Err(format!(
                                "{id:?}: epoch count {} with buffer {}",
                                node.epoch_inserts,
                                buffer.len()
                            ));
                        }
                    } else if !buffer.is_empty() {
                        return Err(format!("{id:?}: buffer in use without epochs"));
                    }
                    for p in buffer {
                        let leaf = self.live.get(&p.id).ok_or(format!("buffered {} not live", p.id))?;
                        if !self.is_ancestor_or_self(id, *leaf) {
                            return Err(format!("buffered {} not below {id:?}", p.id));
                        }
                    }
                    for &c in children {
                        stack.push((c, Some(id), depth + 1));
                    }
                }
            }
        }

        let alive = self.nodes.iter().filter(|n| n.is_some()).count();
        if alive != reachable {
            return Err(format!("{alive} allocated nodes but {reachable} reachable"));
        }
        if let Some(sp) = self.special {
            if !self.is_alive(sp) || !self.node(sp).is_leaf() {
                return Err("special leaf handle is stale".into());
            }
        }
        let (lo, hi) = (
            leaf_depths.iter().min().copied().unwrap_or(0),
            leaf_depths.iter().max().copied().unwrap_or(0),
        );
        if hi - lo > 1 {
            return Err(format!("leaf depths range over {lo}..={hi}"));
        }
        if seen_ids.len() != self.live.len() {
            return Err(format!("{} stored points, {} live ids", seen_ids.len(), self.live.len()));
        }
        if let Some(id) = self.marked.iter().find(|id| !self.live.contains_key(id)) {
            return Err(format!("marked {id} is not live"));
        }

        let reported = self.root_coreset();
        if reported.len() > s + 2 * self.cfg.k {
            return Err(format!("root coreset has {} points", reported.len()));
        }
        if let Some(p) = reported.points.iter().find(|p| self.marked.contains(&p.id)) {
            return Err(format!("marked point {} reported", p.id));
        }
        if self.cfg.eps_w == 0.0 {
            let live_weight: f64 = self
                .leaves_in_order()
                .iter()
                .filter_map(|&l| match &self.node(l).kind {
                    NodeKind::Leaf { points } => Some(points.iter().map(|p| p.weight).sum::<f64>()),
                    NodeKind::Inner { .. } => None,
                })
                .sum();
            let reported_weight = reported.total_weight();
            if (reported_weight - live_weight).abs() > LEDGER_TOL * live_weight.max(1.0) {
                return Err(format!("weight ledger: reported {reported_weight} != stored {live_weight}"));
            }
        }
        Ok(())
    }
}
