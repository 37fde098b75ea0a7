//! Update sequences built from a static ordered dataset, the Birch-like
//! synthetic generator, and the line-based stream replay format.
//!
//! Generators are lazy iterators borrowing the dataset, so long sequences
//! never need to be materialized.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::geometry::{Point, PointId, WeightedPoint};
use crate::sampling::{rng_from_seed, CoreRng};

#[derive(Clone, Debug, PartialEq)]
pub enum UpdateEvent {
    Insert(WeightedPoint),
    Delete(PointId),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamKind {
    InsertOnly,
    SlidingWindow {
        t: usize,
    },
    RandomWindow {
        pi: f64,
    },
    SnakeWindow {
        t: usize,
        low_frac: f64,
        pi_hi: f64,
        pi_lo: f64,
        /// Stop after this many events even if data remains.
        max_events: Option<usize>,
    },
}

impl StreamKind {
    pub fn snake(t: usize, low_frac: f64) -> Self {
        StreamKind::SnakeWindow { t, low_frac, pi_hi: 0.9, pi_lo: 0.1, max_events: None }
    }

    /// Snake window of size 20000 capped at 80000 operations.
    pub fn birch_snake() -> Self {
        StreamKind::SnakeWindow {
            t: 20_000,
            low_frac: 0.2,
            pi_hi: 0.9,
            pi_lo: 0.1,
            max_events: Some(80_000),
        }
    }

    /// Size the live set settles at, if the stream has one.
    pub fn window(&self) -> Option<usize> {
        match *self {
            StreamKind::SlidingWindow { t } | StreamKind::SnakeWindow { t, .. } => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub rng_seed: u64,
}

pub type EventIter<'a> = Box<dyn Iterator<Item = UpdateEvent> + 'a>;

/// Dispatches to the generator for `spec.kind`.
pub fn generate<'a>(data: &'a [WeightedPoint], spec: &StreamSpec) -> Result<EventIter<'a>> {
    Ok(match spec.kind {
        StreamKind::InsertOnly => Box::new(gen_insert_only(data)),
        StreamKind::SlidingWindow { t } => Box::new(gen_sliding_window(data, t)?),
        StreamKind::RandomWindow { pi } => Box::new(gen_random_window(data, pi, spec.rng_seed)?),
        StreamKind::SnakeWindow { t, low_frac, pi_hi, pi_lo, max_events } => {
            let params = SnakeParams { t, low_frac, pi_hi, pi_lo, max_events };
            Box::new(gen_snake_window(data, params, spec.rng_seed)?)
        }
    })
}

pub fn gen_insert_only(data: &[WeightedPoint]) -> impl Iterator<Item = UpdateEvent> + '_ {
    data.iter().cloned().map(UpdateEvent::Insert)
}

/// `t` inserts, then alternating (delete oldest, insert next) pairs.
pub fn gen_sliding_window(data: &[WeightedPoint], t: usize) -> Result<SlidingWindow<'_>> {
    if t == 0 || t > data.len() {
        return Err(config(format!("window {t} must lie in 1..={}", data.len())));
    }
    Ok(SlidingWindow { data, t, next: 0, oldest: 0, delete_next: false })
}

pub struct SlidingWindow<'a> {
    data: &'a [WeightedPoint],
    t: usize,
    next: usize,
    oldest: usize,
    delete_next: bool,
}

impl Iterator for SlidingWindow<'_> {
    type Item = UpdateEvent;

    fn next(&mut self) -> Option<UpdateEvent> {
        if self.next >= self.data.len() {
            return None;
        }
        if self.next < self.t || !self.delete_next {
            let p = self.data[self.next].clone();
            self.next += 1;
            self.delete_next = self.next >= self.t;
            return Some(UpdateEvent::Insert(p));
        }
        let id = self.data[self.oldest].id;
        self.oldest += 1;
        self.delete_next = false;
        Some(UpdateEvent::Delete(id))
    }
}

/// Live ids with O(1) uniform removal.
#[derive(Default)]
struct LiveIds {
    ids: Vec<PointId>,
}

impl LiveIds {
    fn remove_random(&mut self, rng: &mut CoreRng) -> PointId {
        let i = rng.random_range(0..self.ids.len());
        self.ids.swap_remove(i)
    }
}

/// Each step inserts the next point with probability `pi`, otherwise deletes
/// a uniformly random live point. An empty live set forces an insert.
pub fn gen_random_window(data: &[WeightedPoint], pi: f64, seed: u64) -> Result<RandomWindow<'_>> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(config(format!("insertion probability must lie in (0, 1), got {pi}")));
    }
    Ok(RandomWindow { data, pi, next: 0, live: LiveIds::default(), rng: rng_from_seed(seed) })
}

pub struct RandomWindow<'a> {
    data: &'a [WeightedPoint],
    pi: f64,
    next: usize,
    live: LiveIds,
    rng: CoreRng,
}

impl Iterator for RandomWindow<'_> {
    type Item = UpdateEvent;

    fn next(&mut self) -> Option<UpdateEvent> {
        if self.next >= self.data.len() {
            return None;
        }
        let insert = self.live.ids.is_empty() || self.rng.random_bool(self.pi);
        if insert {
            let p = self.data[self.next].clone();
            self.next += 1;
            self.live.ids.push(p.id);
            Some(UpdateEvent::Insert(p))
        } else {
            Some(UpdateEvent::Delete(self.live.remove_random(&mut self.rng)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnakeParams {
    pub t: usize,
    pub low_frac: f64,
    pub pi_hi: f64,
    pub pi_lo: f64,
    pub max_events: Option<usize>,
}

/// Chained random windows: grow with `pi_hi` until `t` points are live,
/// shrink with `pi_lo` until `ceil(low_frac * t)` remain, repeat.
pub fn gen_snake_window(data: &[WeightedPoint], params: SnakeParams, seed: u64) -> Result<SnakeWindow<'_>> {
    let SnakeParams { t, low_frac, pi_hi, pi_lo, .. } = params;
    if t == 0 {
        return Err(config("snake window size must be at least 1"));
    }
    if !(low_frac > 0.0 && low_frac < 1.0) {
        return Err(config(format!("low fraction must lie in (0, 1), got {low_frac}")));
    }
    for pi in [pi_hi, pi_lo] {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(config(format!("insertion probability must lie in (0, 1), got {pi}")));
        }
    }
    let low = ((low_frac * t as f64).ceil() as usize).max(1);
    Ok(SnakeWindow {
        data,
        params,
        low,
        growing: true,
        next: 0,
        emitted: 0,
        live: LiveIds::default(),
        rng: rng_from_seed(seed),
    })
}

pub struct SnakeWindow<'a> {
    data: &'a [WeightedPoint],
    params: SnakeParams,
    low: usize,
    growing: bool,
    next: usize,
    emitted: usize,
    live: LiveIds,
    rng: CoreRng,
}

impl SnakeWindow<'_> {
    /// Live-set size at which the current phase ends.
    pub fn low_mark(&self) -> usize {
        self.low
    }
}

impl Iterator for SnakeWindow<'_> {
    type Item = UpdateEvent;

    fn next(&mut self) -> Option<UpdateEvent> {
        if self.next >= self.data.len() || self.params.max_events.is_some_and(|m| self.emitted >= m) {
            return None;
        }
        let live = self.live.ids.len();
        if self.growing && live >= self.params.t {
            self.growing = false;
        } else if !self.growing && live <= self.low {
            self.growing = true;
        }
        let pi = if self.growing { self.params.pi_hi } else { self.params.pi_lo };
        let insert = live == 0 || self.rng.random_bool(pi);
        self.emitted += 1;
        if insert {
            let p = self.data[self.next].clone();
            self.next += 1;
            self.live.ids.push(p.id);
            Some(UpdateEvent::Insert(p))
        } else {
            Some(UpdateEvent::Delete(self.live.remove_random(&mut self.rng)))
        }
    }
}

/// Checks that a sequence of events is replayable: inserts use fresh ids,
/// deletes target live ids.
#[derive(Default)]
pub struct ReplayValidator {
    live: HashSet<PointId>,
    seen: HashSet<PointId>,
    events: usize,
}

impl ReplayValidator {
    pub fn apply(&mut self, event: &UpdateEvent) -> std::result::Result<(), String> {
        self.events += 1;
        match event {
            UpdateEvent::Insert(p) => {
                if !self.seen.insert(p.id) {
                    return Err(format!("event {}: id {} inserted twice", self.events, p.id));
                }
                self.live.insert(p.id);
            }
            UpdateEvent::Delete(id) => {
                if !self.live.remove(id) {
                    return Err(format!("event {}: delete of dead id {id}", self.events));
                }
            }
        }
        Ok(())
    }

    pub fn live(&self) -> usize {
        self.live.len()
    }

    pub fn events(&self) -> usize {
        self.events
    }
}

/// Parameters of the Birch-like generator: Gaussian blobs with random
/// centers, sizes and spreads, emitted cluster by cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirchParams {
    pub n: usize,
    pub n_clusters: usize,
    pub dim: usize,
    /// Centers are uniform in `[0, extent]^dim`.
    pub extent: f64,
    /// Per-cluster standard deviation range.
    pub sigma: (f64, f64),
    pub rng_seed: u64,
}

impl Default for BirchParams {
    fn default() -> Self {
        Self {
            n: 100_000,
            n_clusters: 100,
            dim: 2,
            extent: 1000.0,
            sigma: (5.0, 20.0),
            rng_seed: 0,
        }
    }
}

impl BirchParams {
    pub fn new(n: usize, n_clusters: usize, dim: usize, rng_seed: u64) -> Self {
        Self { n, n_clusters, dim, rng_seed, ..Self::default() }
    }
}

pub struct SyntheticData {
    pub points: Vec<WeightedPoint>,
    /// Generating cluster of each point.
    pub labels: Vec<usize>,
}

pub fn gen_birch_like(params: &BirchParams) -> Result<SyntheticData> {
    let BirchParams { n, n_clusters, dim, extent, sigma, rng_seed } = *params;
    if n_clusters == 0 || n < n_clusters {
        return Err(config(format!("need n >= n_clusters >= 1, got n = {n}, clusters = {n_clusters}")));
    }
    if dim == 0 {
        return Err(config("dimension must be at least 1"));
    }
    if !(sigma.0 > 0.0 && sigma.0 <= sigma.1 && extent > 0.0) {
        return Err(config("invalid spread or extent"));
    }
    let mut rng = rng_from_seed(rng_seed);

    // Random cluster sizes: every cluster gets one point, the rest is split
    // proportionally to uniform shares (largest remainder rounding).
    let shares: Vec<f64> = (0..n_clusters).map(|_| rng.random_range(0.2..1.8)).collect();
    let share_total: f64 = shares.iter().sum();
    let spare = n - n_clusters;
    let exact: Vec<f64> = shares.iter().map(|s| s / share_total * spare as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize + 1).collect();
    let mut order: Vec<usize> = (0..n_clusters).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a].fract(), exact[b].fract());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let assigned: usize = sizes.iter().sum();
    for &c in order.iter().take(n - assigned) {
        sizes[c] += 1;
    }

    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (c, &size) in sizes.iter().enumerate() {
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..extent)).collect();
        let sd = rng.random_range(sigma.0..=sigma.1);
        let normal = Normal::new(0.0, sd).map_err(|e| config(e.to_string()))?;
        for _ in 0..size {
            let coords = center.iter().map(|m| m + normal.sample(&mut rng)).collect();
            let id = PointId(points.len() as u64);
            points.push(WeightedPoint { id, point: Point::from_raw(coords), weight: 1.0 });
            labels.push(c);
        }
    }
    Ok(SyntheticData { points, labels })
}

/// Writes events as `I,<id>,<w>,<c1>,...,<cd>` / `D,<id>` lines.
pub fn write_stream<W: Write>(mut out: W, events: impl IntoIterator<Item = UpdateEvent>) -> Result<()> {
    for ev in events {
        match ev {
            UpdateEvent::Insert(p) => {
                write!(out, "I,{},{}", p.id.0, p.weight)?;
                for c in p.coords() {
                    write!(out, ",{c}")?;
                }
                writeln!(out)?;
            }
            UpdateEvent::Delete(id) => writeln!(out, "D,{}", id.0)?,
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_stream<R: BufRead>(input: R) -> Result<Vec<UpdateEvent>> {
    let mut events = Vec::new();
    let mut dim = None;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split(',').collect();
        let parse_id = |f: &str| -> Result<PointId> {
            f.trim()
                .parse::<u64>()
                .map(PointId)
                .map_err(|e| bad(format!("bad id {f:?}: {e}")))
        };
        match fields[0] {
            "D" if fields.len() == 2 => events.push(UpdateEvent::Delete(parse_id(fields[1])?)),
            "I" if fields.len() >= 4 => {
                let id = parse_id(fields[1])?;
                let nums = fields[2..]
                    .iter()
                    .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("bad number {f:?}: {e}"))))
                    .collect::<Result<Vec<f64>>>()?;
                let d = nums.len() - 1;
                if *dim.get_or_insert(d) != d {
                    return Err(bad(format!("expected {} coordinates, found {d}", dim.unwrap())));
                }
                let point = Point::new(nums[1..].to_vec()).map_err(|e| bad(e.to_string()))?;
                let p = WeightedPoint::new(id, point, nums[0]).map_err(|e| bad(e.to_string()))?;
                events.push(UpdateEvent::Insert(p));
            }
            other => return Err(bad(format!("unrecognized record starting with {other:?}"))),
        }
    }
    Ok(events)
}
