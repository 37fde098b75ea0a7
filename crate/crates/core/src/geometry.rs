//! Weighted Euclidean point sets and k-means cost evaluation.
//!
//! Every other module builds on these three primitives: squared distance,
//! nearest-center assignment (ties go to the lowest center index) and the
//! weighted cost `cost_w(S, X) = sum_x w(x) min_{c in S} dist2(x, c)`.

use std::fmt;

use crate::error::{usage, Error, Result};

/// Stable identifier of an input point.
///
/// The value `u64::MAX` is reserved for synthetic points (bicriteria centers
/// that a coreset construction adds); input ids must never use it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointId(pub u64);

impl PointId {
    pub const SYNTHETIC: PointId = PointId(u64::MAX);

    pub fn is_synthetic(self) -> bool {
        self == Self::SYNTHETIC
    }
}

impl fmt::Debug for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_synthetic() {
            write!(f, "#synthetic")
        } else {
            write!(f, "#{}", self.0)
        }
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point in R^d with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(usage("a point needs at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(usage(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { coords })
    }

    /// Builds a point from coordinates the caller already validated.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.iter().all(|c| c.is_finite()));
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_raw(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// A point with a stable id and a weight.
///
/// Input weights are strictly positive; weights produced by a coreset
/// construction may be zero after clamping.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoint {
    pub id: PointId,
    pub point: Point,
    pub weight: f64,
}

impl WeightedPoint {
    pub fn new(id: PointId, point: Point, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(usage(format!("weight must be finite and > 0, got {weight}")));
        }
        if id.is_synthetic() {
            return Err(usage("point id u64::MAX is reserved"));
        }
        Ok(Self { id, point, weight })
    }

    /// Unit-weight input point.
    pub fn unit(id: u64, coords: Vec<f64>) -> Result<Self> {
        Self::new(PointId(id), Point::new(coords)?, 1.0)
    }

    pub(crate) fn synthetic(point: Point, weight: f64) -> Self {
        Self { id: PointId::SYNTHETIC, point, weight }
    }

    pub fn coords(&self) -> &[f64] {
        self.point.coords()
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }
}

/// Candidate k-means solution: a nonempty ordered list of centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    centers: Vec<Point>,
}

impl Solution {
    pub fn new(centers: Vec<Point>) -> Result<Self> {
        let first = centers
            .first()
            .ok_or_else(|| usage("a solution needs at least one center"))?;
        let dim = first.dim();
        if let Some(c) = centers.iter().find(|c| c.dim() != dim) {
            return Err(Error::Shape { expected: dim, found: c.dim() });
        }
        Ok(Self { centers })
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].dim()
    }
}

#[inline]
pub(crate) fn dist2_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Squared Euclidean distance.
pub fn dist2(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape { expected: a.dim(), found: b.dim() });
    }
    Ok(dist2_slices(a.coords(), b.coords()))
}

/// Index and squared distance of the nearest center; ties resolve to the
/// lowest index.
#[inline]
pub fn nearest(centers: &[Point], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = dist2_slices(c.coords(), p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub(crate) fn check_dims(solution: &Solution, points: &[WeightedPoint]) -> Result<()> {
    let dim = solution.dim();
    match points.iter().find(|p| p.dim() != dim) {
        Some(p) => Err(Error::Shape { expected: dim, found: p.dim() }),
        None => Ok(()),
    }
}

/// Weighted k-means cost of `points` under `solution`.
pub fn cost(solution: &Solution, points: &[WeightedPoint]) -> Result<f64> {
    check_dims(solution, points)?;
    Ok(cost_unchecked(solution.centers(), points))
}

pub(crate) fn cost_unchecked(centers: &[Point], points: &[WeightedPoint]) -> f64 {
    points
        .iter()
        .map(|p| p.weight * nearest(centers, p.coords()).1)
        .sum()
}

/// Index of the nearest center for every point.
pub fn assign(solution: &Solution, points: &[WeightedPoint]) -> Result<Vec<usize>> {
    check_dims(solution, points)?;
    Ok(points
        .iter()
        .map(|p| nearest(solution.centers(), p.coords()).0)
        .collect())
}

pub fn total_weight(points: &[WeightedPoint]) -> f64 {
    points.iter().map(|p| p.weight).sum()
}
