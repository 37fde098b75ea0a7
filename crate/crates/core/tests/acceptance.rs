//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits nonzero if any failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use dynkmeans::coreset::{build_coreset_traced, CoresetConfig};
use dynkmeans::harness::{run_on, Algorithm, RunConfig, RunSummary, StructureStats};
use dynkmeans::metrics::{default_solutions, distortion, quality};
use dynkmeans::sampling::CoreRng;
use dynkmeans::streams::{
    gen_birch_like, gen_insert_only, gen_random_window, gen_sliding_window, gen_snake_window, generate, BirchParams,
    ReplayValidator, SnakeParams, StreamKind, StreamSpec, UpdateEvent,
};
use dynkmeans::{cost, dist2, optimal_g, DynTree, DynTreeConfig, Point, PointId, Solution, WeightedPoint};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_instance(rng: &mut CoreRng, n: usize, d: usize) -> Vec<WeightedPoint> {
    (0..n)
        .map(|i| {
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(-100.0..100.0)).collect();
            WeightedPoint::new(PointId(i as u64), Point::new(c).unwrap(), rng.random_range(0.1..5.0)).unwrap()
        })
        .collect()
}

fn random_solution(rng: &mut CoreRng, k: usize, d: usize) -> Solution {
    let centers = (0..k)
        .map(|_| Point::new((0..d).map(|_| rng.random_range(-100.0..100.0)).collect()).unwrap())
        .collect();
    Solution::new(centers).unwrap()
}

/// Weighted k-means cost computed without the library.
fn oracle_cost(s: &Solution, pts: &[WeightedPoint]) -> f64 {
    pts.iter()
        .map(|p| {
            let best = s
                .centers()
                .iter()
                .map(|c| c.coords().iter().zip(p.coords()).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            p.weight * best
        })
        .sum()
}

fn birch(n: usize, seed: u64) -> Vec<WeightedPoint> {
    gen_birch_like(&BirchParams::new(n, 100, 2, seed)).unwrap().points
}

fn exact_formulas() -> Outcome {
    let a = Point::new(vec![0.0, 0.0]).unwrap();
    let b = Point::new(vec![3.0, 4.0]).unwrap();
    ensure!(dist2(&a, &b).unwrap() == 25.0, "dist2 of the 3-4-5 triangle");

    let mut rng = CoreRng::seed_from_u64(1);
    let mut checks = 0;
    for trial in 0..200 {
        let d = 1 + trial % 5;
        let x = random_instance(&mut rng, 20 + trial, d);
        let s = random_solution(&mut rng, 1 + trial % 7, d);
        let (left, right) = x.split_at(x.len() / 3);
        let whole = cost(&s, &x).unwrap();
        ensure!(rel_close(whole, oracle_cost(&s, &x), 1e-9), "cost differs from oracle");
        ensure!(
            rel_close(whole, cost(&s, left).unwrap() + cost(&s, right).unwrap(), 1e-9),
            "cost additivity"
        );
        let c = rng.random_range(0.1..10.0);
        let scaled: Vec<_> = x.iter().map(|p| WeightedPoint { weight: c * p.weight, ..p.clone() }).collect();
        ensure!(rel_close(cost(&s, &scaled).unwrap(), c * whole, 1e-9), "weight linearity");
        checks += 3;
    }
    for seed in 0..20 {
        let x = random_instance(&mut rng, 100, 3);
        let sols = default_solutions(&x, &x, 4, seed).unwrap();
        ensure!(distortion(&x, &x, &sols).unwrap().abs() <= 1e-9, "C = X distortion");
        let doubled: Vec<_> = x.iter().map(|p| WeightedPoint { weight: 2.0 * p.weight, ..p.clone() }).collect();
        let sols = default_solutions(&doubled, &x, 4, seed).unwrap();
        ensure!(rel_close(distortion(&doubled, &x, &sols).unwrap(), 1.0, 1e-9), "doubled weights distortion");
        ensure!(rel_close(quality(&x, &x, 4, seed).unwrap(), 1.0, 1e-9), "shared-seed quality");
        checks += 3;
    }
    Ok(format!("{checks} identities exact to 1e-9"))
}

fn coreset_algebra() -> Outcome {
    let mut rng = CoreRng::seed_from_u64(2);
    let mut sampled = 0;
    let mut passthrough = 0;
    for i in 0..100u64 {
        let n = rng.random_range(5..=500);
        let d = rng.random_range(1..=5);
        let k = rng.random_range(1..=6);
        let s = rng.random_range(k + 1..=80);
        let eps_w = if i % 2 == 0 { 0.0 } else { rng.random_range(0.0..0.5) };
        let x = random_instance(&mut rng, n, d);
        let cfg = CoresetConfig { eps_w, ..CoresetConfig::new(k, s, i) };
        let mut crng = CoreRng::seed_from_u64(i);
        let (c, trace) = build_coreset_traced(&x, &cfg, &mut crng).unwrap();
        ensure!(c.len() <= s + 2 * k, "instance {i}: |C| = {} > s + 2k", c.len());
        match trace {
            None => {
                ensure!(n <= s, "instance {i}: no trace for a sampled run");
                let same = c.points.len() == x.len()
                    && c.points.iter().zip(&x).all(|(a, b)| {
                        a.id == b.id
                            && a.weight.to_bits() == b.weight.to_bits()
                            && a.coords().iter().zip(b.coords()).all(|(u, v)| u.to_bits() == v.to_bits())
                    });
                ensure!(same, "instance {i}: pass-through not identical");
                passthrough += 1;
            }
            Some(t) => {
                // Recompute the cluster masses from scratch.
                let mut mass = vec![0.0; t.bicriteria.len()];
                for p in &x {
                    let (j, _) = t
                        .bicriteria
                        .centers()
                        .iter()
                        .enumerate()
                        .map(|(j, z)| (j, dist2(z, &p.point).unwrap()))
                        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                    mass[j] += p.weight;
                }
                for (j, &m) in mass.iter().enumerate() {
                    let drawn: f64 = t
                        .sample_cluster
                        .iter()
                        .zip(&t.sample_weight)
                        .filter(|(&c, _)| c == j)
                        .map(|(_, w)| w)
                        .sum();
                    let lhs = drawn + t.raw_center_weight[j];
                    ensure!(rel_close(lhs, (1.0 + eps_w) * m, 1e-9), "instance {i} cluster {j}: {lhs} vs {m}");
                }
                sampled += 1;
            }
        }
    }
    Ok(format!("{sampled} sampled and {passthrough} pass-through instances"))
}

fn dynamic_audits() -> Outcome {
    let mut ops = 0usize;
    for i in 0..50u64 {
        let n = 500 + 90 * i as usize;
        let data = birch(n, 100 + i);
        let s = [8, 12, 16, 32][i as usize % 4];
        let k = 2 + (i as usize % 3);
        let cfg = match i % 3 {
            0 => DynTreeConfig::plain(k, s, i),
            1 => DynTreeConfig::optimized(k, s, 0.03, i),
            _ => DynTreeConfig::optimized(k, s, 0.1, i),
        };
        let spec = StreamSpec { kind: StreamKind::RandomWindow { pi: 0.6 }, rng_seed: i };
        let replay = |audit: bool| -> Result<(Vec<u64>, String), String> {
            let mut t = DynTree::new(cfg).map_err(|e| e.to_string())?;
            let mut fingerprint = Vec::new();
            for (step, ev) in generate(&data, &spec).unwrap().enumerate() {
                match ev {
                    UpdateEvent::Insert(p) => t.insert(p),
                    UpdateEvent::Delete(id) => t.delete(id),
                }
                .map_err(|e| format!("stream {i} step {step}: {e}"))?;
                if audit {
                    t.audit().map_err(|e| format!("stream {i} step {step}: {e}"))?;
                }
                if step % 97 == 0 {
                    let c = t.root_coreset();
                    fingerprint.push(c.total_weight().to_bits() ^ c.len() as u64);
                }
            }
            Ok((fingerprint, format!("{:?}", t.stats())))
        };
        let first = replay(true)?;
        ops += first.0.len() * 97;
        let second = replay(false)?;
        ensure!(first == second, "stream {i}: replay is not deterministic");
    }
    Ok(format!("50 streams, ~{ops} audited operations, replays identical"))
}

fn insertion_rebuild_bound() -> Outcome {
    let n = 1usize << 14;
    let s = 64;
    let data = birch(n, 4);
    let count = |cfg: DynTreeConfig| -> u64 {
        let mut t = DynTree::new(cfg).unwrap();
        for p in &data {
            t.insert(p.clone()).unwrap();
        }
        t.stats().node_rebuilds
    };
    let optimized = count(DynTreeConfig::optimized(10, s, 0.03, 4));
    let plain = count(DynTreeConfig::plain(10, s, 4));
    let bound = 2 * (n / s) as u64 * (n as f64).log2() as u64;
    let ratio = plain as f64 / optimized as f64;
    ensure!(optimized <= bound, "optimized rebuilds {optimized} > bound {bound}");
    ensure!(ratio >= 5.0, "plain/optimized ratio {ratio:.2} < 5");
    Ok(format!("rebuilds {optimized} <= {bound}, plain/optimized = {ratio:.1}"))
}

fn recompute_triggers(summary: &RunSummary) -> Vec<u64> {
    summary
        .runs
        .iter()
        .map(|r| match &r.stats {
            StructureStats::Dynamic(s) => s.delete_recomputes,
            _ => unreachable!("dynamic run"),
        })
        .collect()
}

fn delta_calibration() -> Outcome {
    let t = 10_000;
    let data = birch(2 * t, 5);
    let base = RunConfig {
        stream: StreamKind::SlidingWindow { t },
        repeats: 5,
        checkpoint_every: 500,
        measure_count: Some(0),
        rng_seed: 5,
        ..RunConfig::new(Algorithm::OptimizedDynamic, 10)
    };
    let delta = 2.0 * base.s as f64 / t as f64;
    let zero = run_on(&RunConfig { delta: Some(0.0), ..base.clone() }, &data).unwrap();
    let cut = run_on(&RunConfig { delta: Some(delta), ..base }, &data).unwrap();
    let limit = 1.0 / (delta * t as f64 / 2.0);
    for (a, b) in recompute_triggers(&zero).iter().zip(recompute_triggers(&cut)) {
        ensure!(b as f64 <= limit * *a as f64, "flushes {b} vs {a} at delta 0 (limit ratio {limit})");
    }
    let (q0, q1) = (zero.aggregate.median_quality, cut.aggregate.median_quality);
    ensure!(q1 >= 0.95 * q0, "median quality {q1:.4} < 0.95 x {q0:.4}");
    Ok(format!(
        "recomputes {:?} vs {:?}, median Q_k {q1:.3} vs {q0:.3}",
        recompute_triggers(&cut),
        recompute_triggers(&zero)
    ))
}

fn snake_quality() -> Outcome {
    let data = birch(100_000, 6);
    let cfg = |a| RunConfig {
        stream: StreamKind::birch_snake(),
        repeats: 5,
        checkpoint_every: 500,
        measure_count: Some(0),
        rng_seed: 6,
        ..RunConfig::new(a, 10)
    };
    let odyn = run_on(&cfg(Algorithm::OptimizedDynamic), &data).unwrap();
    let stat = run_on(&cfg(Algorithm::Static), &data).unwrap();
    let (qo, qs) = (odyn.aggregate.median_quality, stat.aggregate.median_quality);
    ensure!(qo >= 0.93 * qs, "optimized {qo:.4} < 0.93 x static {qs:.4}");
    Ok(format!(
        "median Q_k optimized {qo:.3}, static {qs:.3}; median D_C {:.3} vs {:.3}",
        odyn.aggregate.median_distortion, stat.aggregate.median_distortion
    ))
}

/// Per-op time over the last `window` insertions of an insert-only run.
fn tail_time(a: Algorithm, data: &[WeightedPoint], window: usize) -> f64 {
    let cfg = RunConfig {
        repeats: 1,
        checkpoint_every: 0,
        measure_start: data.len() - window,
        rng_seed: 7,
        ..RunConfig::new(a, 10)
    };
    run_on(&cfg, data).unwrap().aggregate.mean_op_ns
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn scaling_trend() -> Outcome {
    let sizes = [5_000usize, 10_000, 20_000];
    let mut stat = Vec::new();
    let mut dynamic = Vec::new();
    for &n in &sizes {
        let data = birch(n, 7);
        stat.push(tail_time(Algorithm::Static, &data, 500));
        dynamic.push(tail_time(Algorithm::OptimizedDynamic, &data, 2_000));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let r2 = r_squared(&xs, &stat);
    let growth = dynamic[2] / dynamic[0];
    let speedup = stat[2] / dynamic[2];
    ensure!(r2 >= 0.9, "static fit R^2 = {r2:.3}");
    ensure!(growth < 2.0, "dynamic per-op time grew {growth:.2}x");
    ensure!(speedup >= 20.0, "speedup {speedup:.1} < 20");
    Ok(format!(
        "static R^2 {r2:.3}, dynamic growth {growth:.2}x, speedup at 20k {speedup:.0}x (static {:.2} ms/op, dynamic {:.1} us/op)",
        stat[2] / 1e6,
        dynamic[2] / 1e3
    ))
}

fn optimal_arity() -> Outcome {
    ensure!(optimal_g(20_000, 50, 1) == 20, "optimal_g(20000, 50, 1) = {}", optimal_g(20_000, 50, 1));
    let mut rng = CoreRng::seed_from_u64(8);
    for _ in 0..1000 {
        let s = rng.random_range(1..=500);
        let n = rng.random_range(s..=1_000_000);
        let h = rng.random_range(1..=8);
        let g = optimal_g(n, s, h);
        ensure!(g >= 1, "g < 1 at ({n}, {s}, {h})");
        ensure!(optimal_g(n, s, h + 1) <= g, "not nonincreasing in h at ({n}, {s}, {h})");
        ensure!(optimal_g(n, s + 1, h) <= g, "not nonincreasing in s at ({n}, {s}, {h})");
        ensure!(optimal_g(n + 1000, s, h) >= g, "not nondecreasing in n at ({n}, {s}, {h})");
    }
    Ok("optimal_g(20000, 50, 1) = 20; monotone on 1000 triples".into())
}

fn baseline_equivalence() -> Outcome {
    let mut steps = 0;
    for i in 0..20u64 {
        let data = birch(1500, 200 + i);
        let k = 2 + (i as usize % 3);
        let s = [8, 16, 24][i as usize % 3];
        let plain = DynTreeConfig::plain(k, s, i);
        let stripped = DynTreeConfig { insertion_epochs: false, ..DynTreeConfig::optimized(k, s, 0.0, i) };
        let (mut a, mut b) = (DynTree::new(plain).unwrap(), DynTree::new(stripped).unwrap());
        let kind = if i % 2 == 0 { StreamKind::RandomWindow { pi: 0.6 } } else { StreamKind::SlidingWindow { t: 400 } };
        for (step, ev) in generate(&data, &StreamSpec { kind, rng_seed: i }).unwrap().enumerate() {
            match &ev {
                UpdateEvent::Insert(p) => {
                    a.insert(p.clone()).unwrap();
                    b.insert(p.clone()).unwrap();
                }
                UpdateEvent::Delete(id) => {
                    a.delete(*id).unwrap();
                    b.delete(*id).unwrap();
                }
            }
            ensure!(a.stats() == b.stats(), "stream {i} step {step}: counters diverge");
            steps += 1;
        }
        ensure!(a.root_coreset() == b.root_coreset(), "stream {i}: final coresets differ");
    }
    Ok(format!("20 streams, {steps} steps with identical counters"))
}

fn stream_generators() -> Outcome {
    let mut validated = 0usize;
    for seed in 0..20u64 {
        let data = birch(3000, 300 + seed);
        let snake = SnakeParams { t: 800, low_frac: 0.2, pi_hi: 0.9, pi_lo: 0.1, max_events: None };
        let streams: Vec<(&str, Box<dyn Iterator<Item = UpdateEvent>>)> = vec![
            ("insert-only", Box::new(gen_insert_only(&data))),
            ("sliding", Box::new(gen_sliding_window(&data, 700).unwrap())),
            ("random", Box::new(gen_random_window(&data, 0.6, seed).unwrap())),
            ("snake", Box::new(gen_snake_window(&data, snake, seed).unwrap())),
        ];
        for (name, events) in streams {
            let mut v = ReplayValidator::default();
            for ev in events {
                v.apply(&ev).map_err(|e| format!("{name} seed {seed}: {e}"))?;
            }
            if name == "sliding" {
                ensure!(v.events() == 2 * data.len() - 700, "sliding count {}", v.events());
            }
            validated += v.events();
        }
    }
    let mut totals = Vec::new();
    for seed in 0..20u64 {
        let data = birch(100_000, 400 + seed);
        let spec = StreamSpec { kind: StreamKind::birch_snake(), rng_seed: seed };
        let mut v = ReplayValidator::default();
        for ev in generate(&data, &spec).unwrap() {
            v.apply(&ev).map_err(|e| format!("birch-snake seed {seed}: {e}"))?;
        }
        ensure!((v.events() as f64 - 80_000.0).abs() <= 8_000.0, "birch-snake total {}", v.events());
        totals.push(v.events());
    }
    let (lo, hi) = (totals.iter().min().unwrap(), totals.iter().max().unwrap());
    Ok(format!("{validated} events validated; birch-snake totals in [{lo}, {hi}]"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exact formulas", exact_formulas),
        ("coreset algebra", coreset_algebra),
        ("dynamic structure audits", dynamic_audits),
        ("insertion rebuild bound", insertion_rebuild_bound),
        ("deletion cut-off calibration", delta_calibration),
        ("snake-window quality", snake_quality),
        ("scaling trend", scaling_trend),
        ("optimal arity", optimal_arity),
        ("baseline equivalence", baseline_equivalence),
        ("stream generators", stream_generators),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
