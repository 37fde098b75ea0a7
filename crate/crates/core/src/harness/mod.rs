//! Benchmark harness: replays an update stream into one of the dynamic
//! structures or a from-scratch baseline, timing each update together with
//! the extraction of a k-means solution, and evaluates distortion and
//! quality at periodic checkpoints outside the timed sections.

mod data;
mod report;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::coreset::{build_coreset, CoresetConfig};
use crate::dyntree::{DynTree, DynTreeConfig, DynTreeStats};
use crate::error::{config, Error, Result};
use crate::geometry::{total_weight, PointId, Solution, WeightedPoint};
use crate::metrics::{evaluate, EvalReport};
use crate::sampling::{derive_seed, rng_from_seed};
use crate::seeding::{kmeanspp, SeedingConfig};
use crate::shallow::{ShallowConfig, ShallowStats, ShallowTree};
use crate::streams::{gen_birch_like, generate, BirchParams, StreamKind, StreamSpec, UpdateEvent};

pub use data::{ingest_csv, ingest_reader, write_dataset, IngestOptions};
pub use report::{compare, read_rows_csv, write_rows_csv, CompareTable, ReportRow};

const STREAM_SALT: u64 = 0x5354_5245;
const SHUFFLE_SALT: u64 = 0x5348_5546;
const REPEAT_SALT: u64 = 0x5245_5045;
const BASELINE_SALT: u64 = 0x4241_5345;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dynamic,
    OptimizedDynamic,
    Shallow,
    Static,
    Random,
    KmeansOnly,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::OptimizedDynamic,
        Algorithm::Dynamic,
        Algorithm::Shallow,
        Algorithm::Static,
        Algorithm::Random,
        Algorithm::KmeansOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dynamic => "dynamic",
            Algorithm::OptimizedDynamic => "optimized_dynamic",
            Algorithm::Shallow => "shallow",
            Algorithm::Static => "static",
            Algorithm::Random => "random",
            Algorithm::KmeansOnly => "kmeans_only",
        }
    }

    /// Short table label.
    pub fn short(self) -> &'static str {
        match self {
            Algorithm::Dynamic => "Dyn",
            Algorithm::OptimizedDynamic => "ODyn",
            Algorithm::Shallow => "Shallow",
            Algorithm::Static => "Stat",
            Algorithm::Random => "Rand",
            Algorithm::KmeansOnly => "KM",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key || a.short().to_ascii_lowercase() == key)
            .ok_or_else(|| config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf },
    Synthetic(BirchParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    pub s: usize,
    /// Deletion cut-off; `None` picks `2s/t` for sliding windows of size `t`
    /// and 0.03 otherwise.
    pub delta: Option<f64>,
    /// Height of the shallow tree.
    pub height: usize,
    pub stream: StreamKind,
    pub source: DataSource,
    pub dedupe: bool,
    pub shuffle: bool,
    /// Index of the first timed operation.
    pub measure_start: usize,
    /// Number of timed operations; `None` times everything after the start.
    pub measure_count: Option<usize>,
    /// Evaluate metrics after every this many operations; 0 disables.
    pub checkpoint_every: usize,
    /// Operations averaged per timing row.
    pub bucket: usize,
    pub repeats: usize,
    pub rng_seed: u64,
    /// Column name in comparison tables; derived from the source and stream
    /// when absent.
    pub label: Option<String>,
}

impl RunConfig {
    /// Desk-scale defaults: Birch-like data with 20000 points, `s = 5k`.
    pub fn new(algorithm: Algorithm, k: usize) -> Self {
        Self {
            algorithm,
            k,
            s: 5 * k,
            delta: None,
            height: 1,
            stream: StreamKind::InsertOnly,
            source: DataSource::Synthetic(BirchParams::new(20_000, 100, 2, 0)),
            dedupe: false,
            shuffle: false,
            measure_start: 0,
            measure_count: None,
            checkpoint_every: 100,
            bucket: 20,
            repeats: 5,
            rng_seed: 0,
            label: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        CoresetConfig::new(self.k, self.s, 0).validate()?;
        if let Some(d) = self.delta {
            if !(0.0..=1.0).contains(&d) {
                return Err(config(format!("delta must lie in [0, 1], got {d}")));
            }
        }
        if self.repeats == 0 || self.bucket == 0 || self.height == 0 {
            return Err(config("repeats, bucket and height must be at least 1"));
        }
        Ok(())
    }

    pub fn resolved_delta(&self) -> f64 {
        self.delta.unwrap_or(match self.stream {
            StreamKind::SlidingWindow { t } => (2.0 * self.s as f64 / t as f64).min(1.0),
            _ => 0.03,
        })
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let source = match &self.source {
            DataSource::Csv { path } => {
                path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned())
            }
            DataSource::Synthetic(p) => format!("birch{}", p.n),
        };
        let stream = match self.stream {
            StreamKind::InsertOnly => "insert".to_string(),
            StreamKind::SlidingWindow { t } => format!("sliding{t}"),
            StreamKind::RandomWindow { pi } => format!("random{pi}"),
            StreamKind::SnakeWindow { t, .. } => format!("snake{t}"),
        };
        format!("{source}/{stream}")
    }

    pub fn stream_spec(&self) -> StreamSpec {
        StreamSpec { kind: self.stream, rng_seed: derive_seed(self.rng_seed, STREAM_SALT) }
    }

    fn repeat_seed(&self, repeat: usize) -> u64 {
        derive_seed(derive_seed(self.rng_seed, REPEAT_SALT), repeat as u64)
    }
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Vec<WeightedPoint>> {
    let opts = IngestOptions {
        dedupe: cfg.dedupe,
        shuffle: cfg.shuffle,
        shuffle_seed: derive_seed(cfg.rng_seed, SHUFFLE_SALT),
    };
    match &cfg.source {
        DataSource::Csv { path } => ingest_csv(path, &opts),
        DataSource::Synthetic(params) => {
            let mut buf = Vec::new();
            let points = gen_birch_like(params)?.points;
            if !opts.dedupe && !opts.shuffle {
                return Ok(points);
            }
            write_dataset(&mut buf, &points)?;
            ingest_reader(buf.as_slice(), &opts)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Number of operations applied when the bucket closed.
    pub op: usize,
    pub live: usize,
    pub ops: usize,
    pub mean_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub op: usize,
    pub live: usize,
    pub coreset_size: usize,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureStats {
    Dynamic(DynTreeStats),
    Shallow(ShallowStats),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub total_ops: usize,
    pub timed_ops: usize,
    #[serde(with = "crate::serde_float")]
    pub mean_op_ns: f64,
    #[serde(with = "crate::serde_float")]
    pub median_op_ns: f64,
    pub buckets: Vec<Bucket>,
    pub checkpoints: Vec<Checkpoint>,
    pub stats: StructureStats,
}

impl RunRecord {
    /// Mean quality over checkpoints; NaN without checkpoints.
    pub fn mean_quality(&self) -> f64 {
        mean(self.checkpoints.iter().map(|c| c.report.quality))
    }

    pub fn mean_distortion(&self) -> f64 {
        mean(self.checkpoints.iter().map(|c| c.report.distortion))
    }
}

/// Averages and medians over repeats; NaN where undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(with = "crate::serde_float")]
    pub mean_op_ns: f64,
    #[serde(with = "crate::serde_float")]
    pub median_op_ns: f64,
    #[serde(with = "crate::serde_float")]
    pub mean_quality: f64,
    #[serde(with = "crate::serde_float")]
    pub median_quality: f64,
    #[serde(with = "crate::serde_float")]
    pub mean_distortion: f64,
    #[serde(with = "crate::serde_float")]
    pub median_distortion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub config: RunConfig,
    pub runs: Vec<RunRecord>,
    pub aggregate: Aggregate,
}

impl RunSummary {
    /// `mean time(baseline) / mean time(self)`.
    pub fn speedup_over(&self, baseline: &RunSummary) -> f64 {
        baseline.aggregate.mean_op_ns / self.aggregate.mean_op_ns
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Live points in insertion order modulo swap-removal.
#[derive(Default)]
struct LiveSet {
    points: Vec<WeightedPoint>,
    index: HashMap<PointId, usize>,
}

impl LiveSet {
    fn apply(&mut self, ev: &UpdateEvent) -> Result<()> {
        match ev {
            UpdateEvent::Insert(p) => {
                if self.index.insert(p.id, self.points.len()).is_some() {
                    return Err(config(format!("stream inserts id {} twice", p.id)));
                }
                self.points.push(p.clone());
            }
            UpdateEvent::Delete(id) => {
                let i = self
                    .index
                    .remove(id)
                    .ok_or_else(|| config(format!("stream deletes dead id {id}")))?;
                self.points.swap_remove(i);
                if let Some(moved) = self.points.get(i) {
                    self.index.insert(moved.id, i);
                }
            }
        }
        Ok(())
    }
}

enum Engine {
    Dyn(Box<DynTree>),
    Shallow(Box<ShallowTree>),
    Static(CoresetConfig),
    Random(usize),
    KmeansOnly,
}

impl Engine {
    fn new(cfg: &RunConfig, seed: u64, n_hint: usize) -> Result<Self> {
        Ok(match cfg.algorithm {
            Algorithm::Dynamic => Engine::Dyn(Box::new(DynTree::new(DynTreeConfig::plain(cfg.k, cfg.s, seed))?)),
            Algorithm::OptimizedDynamic => {
                let tc = DynTreeConfig::optimized(cfg.k, cfg.s, cfg.resolved_delta(), seed);
                Engine::Dyn(Box::new(DynTree::new(tc)?))
            }
            Algorithm::Shallow => {
                let sc = ShallowConfig::auto(cfg.height, n_hint, cfg.k, cfg.s, seed);
                Engine::Shallow(Box::new(ShallowTree::new(sc)?))
            }
            Algorithm::Static => Engine::Static(CoresetConfig::new(cfg.k, cfg.s, seed)),
            Algorithm::Random => Engine::Random(cfg.s),
            Algorithm::KmeansOnly => Engine::KmeansOnly,
        })
    }

    /// Applies the update; baselines only track the live set, which the
    /// caller maintains.
    fn update(&mut self, ev: &UpdateEvent, live_after: usize) -> Result<()> {
        match self {
            Engine::Dyn(t) => match ev {
                UpdateEvent::Insert(p) => t.insert(p.clone()),
                UpdateEvent::Delete(id) => t.delete(*id),
            },
            Engine::Shallow(t) => {
                let apply = |t: &mut ShallowTree| match ev {
                    UpdateEvent::Insert(p) => t.insert(p.clone()),
                    UpdateEvent::Delete(id) => t.delete(*id),
                };
                match apply(t) {
                    Err(Error::RebuildRequired { .. }) => {
                        let hint = live_after.max(t.config().leaf_count().unwrap_or(1));
                        t.rebuild(hint)?;
                        apply(t)
                    }
                    other => other,
                }
            }
            _ => Ok(()),
        }
    }

    /// Summary of the live set handed to k-means++; `None` means the full
    /// data is used directly.
    fn summary(&self, live: &[WeightedPoint], op_seed: u64) -> Result<Option<Vec<WeightedPoint>>> {
        Ok(match self {
            Engine::Dyn(t) => Some(t.root_coreset().points),
            Engine::Shallow(t) => Some(t.root_coreset().points),
            Engine::Static(cc) => {
                let cc = CoresetConfig { rng_seed: derive_seed(cc.rng_seed, op_seed), ..*cc };
                Some(build_coreset(live, &cc)?.points)
            }
            Engine::Random(s) => Some(uniform_sample(live, *s, op_seed)),
            Engine::KmeansOnly => None,
        })
    }

    fn stats(&self) -> StructureStats {
        match self {
            Engine::Dyn(t) => StructureStats::Dynamic(t.stats().clone()),
            Engine::Shallow(t) => StructureStats::Shallow(t.stats().clone()),
            _ => StructureStats::None,
        }
    }
}

/// `s` points drawn without replacement, each weighted `W / s` so the total
/// weight is preserved. Sets of at most `s` points are returned as is.
pub fn uniform_sample(live: &[WeightedPoint], s: usize, seed: u64) -> Vec<WeightedPoint> {
    if live.len() <= s {
        return live.to_vec();
    }
    let w = total_weight(live) / s as f64;
    let mut rng = rng_from_seed(derive_seed(seed, BASELINE_SALT));
    index::sample(&mut rng, live.len(), s)
        .into_iter()
        .map(|i| WeightedPoint { weight: w, ..live[i].clone() })
        .collect()
}

struct Timer {
    bucket: usize,
    sum: u128,
    count: usize,
    all: Vec<u64>,
    buckets: Vec<Bucket>,
}

impl Timer {
    fn record(&mut self, ns: u64, op: usize, live: usize) {
        self.all.push(ns);
        self.sum += ns as u128;
        self.count += 1;
        if self.count == self.bucket {
            self.close(op, live);
        }
    }

    fn close(&mut self, op: usize, live: usize) {
        if self.count > 0 {
            let mean_ns = self.sum as f64 / self.count as f64;
            self.buckets.push(Bucket { op, live, ops: self.count, mean_ns });
            self.sum = 0;
            self.count = 0;
        }
    }
}

/// Runs all repeats of `cfg` on a dataset loaded from its source.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    run_on(cfg, &data)
}

/// Runs all repeats of `cfg` on `data`, ignoring `cfg.source`.
pub fn run_on(cfg: &RunConfig, data: &[WeightedPoint]) -> Result<RunSummary> {
    cfg.validate()?;
    let runs = (0..cfg.repeats).map(|r| run_once(cfg, data, r)).collect::<Result<Vec<_>>>()?;
    let per = |f: fn(&RunRecord) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    let times = per(|r| r.mean_op_ns);
    let qualities = per(RunRecord::mean_quality);
    let distortions = per(RunRecord::mean_distortion);
    let aggregate = Aggregate {
        mean_op_ns: mean(times.iter().copied()),
        median_op_ns: median(&times),
        mean_quality: mean(qualities.iter().copied()),
        median_quality: median(&qualities),
        mean_distortion: mean(distortions.iter().copied()),
        median_distortion: median(&distortions),
    };
    Ok(RunSummary { label: cfg.label(), config: cfg.clone(), runs, aggregate })
}

/// One seeded replay.
pub fn run_once(cfg: &RunConfig, data: &[WeightedPoint], repeat: usize) -> Result<RunRecord> {
    cfg.validate()?;
    let seed = cfg.repeat_seed(repeat);
    let n_hint = cfg.stream.window().unwrap_or(data.len()).min(data.len()).max(1);
    let mut engine = Engine::new(cfg, seed, n_hint)?;
    let events = generate(data, &cfg.stream_spec())?;

    let start = cfg.measure_start;
    let end = cfg.measure_count.map_or(usize::MAX, |c| start.saturating_add(c));
    let mut live = LiveSet::default();
    let mut timer = Timer { bucket: cfg.bucket, sum: 0, count: 0, all: Vec::new(), buckets: Vec::new() };
    let mut checkpoints = Vec::new();
    let mut total_ops = 0;

    for (i, ev) in events.enumerate() {
        total_ops = i + 1;
        live.apply(&ev)?;
        let n = live.points.len();
        let op_seed = derive_seed(seed, i as u64);
        let timed = (start..end).contains(&i);
        let checkpoint = cfg.checkpoint_every > 0 && total_ops % cfg.checkpoint_every == 0 && n > 0;

        let mut extracted: Option<(Option<Vec<WeightedPoint>>, Solution)> = None;
        if timed {
            let t0 = Instant::now();
            engine.update(&ev, n)?;
            if n > 0 {
                let summary = engine.summary(&live.points, op_seed)?;
                let on = summary.as_deref().unwrap_or(&live.points);
                let sol = kmeanspp(on, &SeedingConfig::new(cfg.k, op_seed))?;
                extracted = Some((summary, sol));
            }
            timer.record(t0.elapsed().as_nanos() as u64, total_ops, n);
            if i + 1 == end {
                timer.close(total_ops, n);
            }
        } else {
            engine.update(&ev, n)?;
        }

        if checkpoint {
            let (summary, sol) = match extracted {
                Some(x) => x,
                None => {
                    let summary = engine.summary(&live.points, op_seed)?;
                    let on = summary.as_deref().unwrap_or(&live.points);
                    let sol = kmeanspp(on, &SeedingConfig::new(cfg.k, op_seed))?;
                    (summary, sol)
                }
            };
            let c = summary.as_deref().unwrap_or(&live.points);
            let report = evaluate(c, &live.points, cfg.k, op_seed, Some(&sol))?;
            checkpoints.push(Checkpoint { op: total_ops, live: n, coreset_size: c.len(), report });
        }
    }
    timer.close(total_ops, live.points.len());

    let mean_op_ns = mean(timer.all.iter().map(|&t| t as f64));
    let all: Vec<f64> = timer.all.iter().map(|&t| t as f64).collect();
    Ok(RunRecord {
        repeat,
        seed,
        total_ops,
        timed_ops: timer.all.len(),
        mean_op_ns,
        median_op_ns: median(&all),
        buckets: timer.buckets,
        checkpoints,
        stats: engine.stats(),
    })
}
