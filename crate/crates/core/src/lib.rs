//! Fully dynamic coresets for Euclidean k-means.
//!
//! The [`dyntree`] module maintains a coreset of a point set under arbitrary
//! insertions and deletions with a merge-and-reduce tree over compressed
//! leaves. [`shallow`] is the fixed-height variant. [`streams`], [`metrics`]
//! and [`harness`] form the evaluation harness used by the CLI.

pub mod coreset;
pub mod dyntree;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod sampling;
pub mod seeding;
mod serde_float;
pub mod shallow;
pub mod streams;

pub use coreset::{build_coreset, merge, Coreset, CoresetConfig};
pub use error::{Error, Result};
pub use geometry::{assign, cost, dist2, Point, PointId, Solution, WeightedPoint};
pub use seeding::{bicriteria, kmeanspp, lloyd_step, SeedingConfig};
pub use dyntree::{DynTree, DynTreeConfig, DynTreeStats};
pub use streams::{StreamKind, StreamSpec, UpdateEvent};
pub use shallow::{optimal_g, ShallowConfig, ShallowStats, ShallowTree};
pub use metrics::{distortion, evaluate, quality, EvalReport};
pub use harness::{Algorithm, DataSource, RunConfig, RunRecord, RunSummary};
