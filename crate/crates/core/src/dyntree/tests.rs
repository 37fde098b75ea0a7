use rand::{Rng, SeedableRng};

use super::*;
use crate::geometry::Point;
use crate::sampling::CoreRng;

fn pt(id: u64, rng: &mut CoreRng) -> WeightedPoint {
    let c = vec![rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)];
    WeightedPoint::new(PointId(id), Point::new(c).unwrap(), 1.0).unwrap()
}

fn audited(tree: &DynTree) {
    if let Err(e) = tree.audit() {
        panic!("audit failed: {e}");
    }
}

#[test]
fn single_insert() {
    let mut t = DynTree::new(DynTreeConfig::plain(2, 8, 0)).unwrap();
    let p = WeightedPoint::new(PointId(4), Point::new(vec![1.0, 2.0]).unwrap(), 2.5).unwrap();
    t.insert(p.clone()).unwrap();
    let c = t.root_coreset();
    assert_eq!(c.points, vec![p]);
    audited(&t);
}

#[test]
fn s_plus_one_points_make_two_leaves() {
    let mut rng = CoreRng::seed_from_u64(1);
    for cfg in [DynTreeConfig::plain(2, 8, 0), DynTreeConfig::optimized(2, 8, 0.1, 0)] {
        let mut t = DynTree::new(cfg).unwrap();
        for i in 0..9 {
            t.insert(pt(i, &mut rng)).unwrap();
        }
        let leaves = t.leaves_in_order();
        assert_eq!(leaves.len(), 2);
        let mut sizes: Vec<_> = leaves.iter().map(|&l| t.leaf_len(l)).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 8]);
        assert_eq!(t.leaf_len(t.special.unwrap()), 1);
        audited(&t);
    }
}

#[test]
fn small_dataset_passes_through_to_root() {
    let mut rng = CoreRng::seed_from_u64(2);
    let mut t = DynTree::new(DynTreeConfig::optimized(2, 16, 0.0, 0)).unwrap();
    let mut pts: Vec<_> = (0..16).map(|i| pt(i, &mut rng)).collect();
    for p in &pts {
        t.insert(p.clone()).unwrap();
    }
    let mut got = t.root_coreset().points;
    got.sort_by_key(|p| p.id);
    pts.sort_by_key(|p| p.id);
    assert_eq!(got, pts);
}

#[test]
fn insert_then_delete_empties() {
    let mut rng = CoreRng::seed_from_u64(3);
    let mut t = DynTree::new(DynTreeConfig::plain(2, 8, 0)).unwrap();
    t.insert(pt(1, &mut rng)).unwrap();
    t.delete(PointId(1)).unwrap();
    assert!(t.root_coreset().is_empty());
    assert!(t.is_empty());
    audited(&t);
}

#[test]
fn empty_tree_reports_empty_coreset() {
    let t = DynTree::new(DynTreeConfig::plain(2, 8, 0)).unwrap();
    assert!(t.root_coreset().is_empty());
    audited(&t);
}

#[test]
fn usage_errors() {
    let mut rng = CoreRng::seed_from_u64(4);
    let mut t = DynTree::new(DynTreeConfig::plain(2, 8, 0)).unwrap();
    t.insert(pt(1, &mut rng)).unwrap();
    assert!(matches!(t.insert(pt(1, &mut rng)), Err(Error::Usage(_))));
    assert!(matches!(t.delete(PointId(2)), Err(Error::Usage(_))));
    let bad = WeightedPoint::new(PointId(9), Point::new(vec![1.0]).unwrap(), 1.0).unwrap();
    assert!(matches!(t.insert(bad), Err(Error::Shape { .. })));
    assert!(DynTree::new(DynTreeConfig::plain(4, 4, 0)).is_err());
    assert!(DynTree::new(DynTreeConfig::optimized(2, 8, 1.5, 0)).is_err());
}

#[test]
fn marked_delete_is_idempotent() {
    let mut rng = CoreRng::seed_from_u64(5);
    let mut t = DynTree::new(DynTreeConfig::optimized(2, 8, 0.5, 0)).unwrap();
    for i in 0..200 {
        t.insert(pt(i, &mut rng)).unwrap();
    }
    let victim = (0..200)
        .map(PointId)
        .find(|id| !t.node(t.root).maintained().any(|p| p.id == *id))
        .unwrap();
    t.delete(victim).unwrap();
    assert!(t.is_marked(victim));
    let before = t.stats().clone();
    t.delete(victim).unwrap();
    assert_eq!(t.stats(), &before);
    audited(&t);
}

#[test]
fn zero_delta_never_marks() {
    let mut rng = CoreRng::seed_from_u64(6);
    let mut t = DynTree::new(DynTreeConfig::optimized(2, 8, 0.0, 0)).unwrap();
    for i in 0..300 {
        t.insert(pt(i, &mut rng)).unwrap();
    }
    for i in 0..150 {
        t.delete(PointId(i)).unwrap();
        assert_eq!(t.marked_len(), 0);
    }
    assert_eq!(t.stats().delete_recomputes, 150);
    assert_eq!(t.stats().lazy_marks, 0);
}

#[test]
fn phase_fires_once_between_1000_and_1500() {
    let mut rng = CoreRng::seed_from_u64(7);
    let mut t = DynTree::new(DynTreeConfig::optimized(3, 64, 0.0, 0)).unwrap();
    for i in 0..1000 {
        t.insert(pt(i, &mut rng)).unwrap();
    }
    let before = t.stats().phase_rebuilds;
    for i in 1000..1500 {
        t.insert(pt(i, &mut rng)).unwrap();
    }
    assert_eq!(t.stats().phase_rebuilds - before, 1);
    audited(&t);
}

#[test]
fn stable_sliding_window_has_no_phases() {
    let mut rng = CoreRng::seed_from_u64(8);
    let mut t = DynTree::new(DynTreeConfig::optimized(3, 16, 0.02, 0)).unwrap();
    let w = 500;
    for i in 0..w {
        t.insert(pt(i, &mut rng)).unwrap();
    }
    let before = t.stats().phase_rebuilds;
    for i in w..3000 {
        t.delete(PointId(i - w)).unwrap();
        t.insert(pt(i, &mut rng)).unwrap();
    }
    assert_eq!(t.stats().phase_rebuilds, before);
}

#[test]
fn phase_rebuild_resets_state() {
    let mut rng = CoreRng::seed_from_u64(9);
    let mut t = DynTree::new(DynTreeConfig::optimized(2, 8, 0.3, 0)).unwrap();
    for i in 0..400 {
        t.insert(pt(i, &mut rng)).unwrap();
    }
    for i in 0..40 {
        t.delete(PointId(i * 3)).unwrap();
    }
    t.start_phase();
    assert_eq!(t.marked_len(), 0);
    for n in t.live_node_ids() {
        if let NodeKind::Inner { buffer, .. } = &t.node(n).kind {
            assert!(buffer.is_empty());
        }
        assert_eq!(t.node(n).epoch_inserts, 0);
    }
    assert_eq!(t.phase_start_size(), t.len());
    audited(&t);
}

#[test]
fn path_rebuilds_bounded_by_height() {
    let mut rng = CoreRng::seed_from_u64(10);
    let mut t = DynTree::new(DynTreeConfig::plain(2, 8, 0)).unwrap();
    for i in 0..500 {
        t.insert(pt(i, &mut rng)).unwrap();
    }
    let leaves = t.leaf_count();
    let bound = (leaves as f64).log2().ceil() as u64 + 1;
    let before = t.stats().node_rebuilds;
    let leaf = t.leaves_in_order()[3];
    t.update_inner_coreset(leaf);
    assert!(t.stats().node_rebuilds - before <= bound);
}

/// Random mixed updates under every configuration, audited after each op.
#[test]
fn random_updates_keep_invariants() {
    let configs = [
        DynTreeConfig::plain(2, 6, 1),
        DynTreeConfig::optimized(2, 6, 0.05, 1),
        DynTreeConfig::optimized(3, 10, 0.0, 1),
        DynTreeConfig { insertion_epochs: false, ..DynTreeConfig::optimized(2, 7, 0.2, 1) },
    ];
    for cfg in configs {
        let mut rng = CoreRng::seed_from_u64(11);
        let mut t = DynTree::new(cfg).unwrap();
        let mut live: Vec<u64> = Vec::new();
        let mut next = 0u64;
        for step in 0..1500 {
            let grow = live.is_empty() || rng.random_bool(0.55);
            if grow {
                t.insert(pt(next, &mut rng)).unwrap();
                live.push(next);
                next += 1;
            } else {
                let i = rng.random_range(0..live.len());
                let id = live.swap_remove(i);
                t.delete(PointId(id)).unwrap();
            }
            if let Err(e) = t.audit() {
                panic!("{cfg:?} step {step}: {e} marked={}", t.marked_len());
            }
        }
    }
}

#[test]
fn deterministic_replay() {
    let run = || {
        let mut rng = CoreRng::seed_from_u64(12);
        let mut t = DynTree::new(DynTreeConfig::optimized(3, 12, 0.03, 77)).unwrap();
        let mut out = Vec::new();
        for i in 0..800 {
            t.insert(pt(i, &mut rng)).unwrap();
            if i % 3 == 2 {
                t.delete(PointId(i / 2)).unwrap();
            }
            out.push(t.root_coreset());
        }
        (t.stats().clone(), out)
    };
    assert_eq!(run(), run());
}
