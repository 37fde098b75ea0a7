//! Dataset CSV ingestion and writing.
//!
//! A file may start with a header row (detected when any field of the first
//! row is not a number). In that case columns named `id` and `weight` are
//! read as such and every other column is a coordinate. Without a header all
//! columns are coordinates, weights are 1 and ids are row numbers.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::geometry::{Point, PointId, WeightedPoint};
use crate::sampling::rng_from_seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Drop rows whose coordinates exactly repeat an earlier row.
    pub dedupe: bool,
    pub shuffle: bool,
    pub shuffle_seed: u64,
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<Vec<WeightedPoint>> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, opts)
}

struct Layout {
    id: Option<usize>,
    weight: Option<usize>,
    coords: Vec<usize>,
}

fn layout_from_header(fields: &csv::StringRecord) -> Layout {
    let mut layout = Layout { id: None, weight: None, coords: Vec::new() };
    for (i, name) in fields.iter().enumerate() {
        match name.trim().to_ascii_lowercase().as_str() {
            "id" => layout.id = Some(i),
            "weight" => layout.weight = Some(i),
            _ => layout.coords.push(i),
        }
    }
    layout
}

pub fn ingest_reader<R: Read>(input: R, opts: &IngestOptions) -> Result<Vec<WeightedPoint>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut layout: Option<Layout> = None;
    let mut width = 0;
    let mut points = Vec::new();
    let mut ids = HashSet::new();

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        let bad = |msg: String| Error::Parse { line, msg };
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if layout.is_none() {
            width = record.len();
            if record.iter().any(|f| f.trim().parse::<f64>().is_err()) {
                let l = layout_from_header(&record);
                if l.coords.is_empty() {
                    return Err(bad("header names no coordinate columns".into()));
                }
                layout = Some(l);
                continue;
            }
            layout = Some(Layout { id: None, weight: None, coords: (0..width).collect() });
        }
        let l = layout.as_ref().expect("set above");
        if record.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", record.len())));
        }
        let num = |i: usize| -> Result<f64> {
            let f = record[i].trim();
            f.parse::<f64>().map_err(|_| bad(format!("field {} is not a number: {f:?}", i + 1)))
        };
        let coords = l.coords.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
        let weight = match l.weight {
            Some(i) => num(i)?,
            None => 1.0,
        };
        let id = match l.id {
            Some(i) => {
                let f = record[i].trim();
                PointId(f.parse::<u64>().map_err(|_| bad(format!("bad id {f:?}")))?)
            }
            None => PointId(points.len() as u64),
        };
        if !ids.insert(id) {
            return Err(bad(format!("duplicate id {id}")));
        }
        let point = Point::new(coords).map_err(|e| bad(e.to_string()))?;
        points.push(WeightedPoint::new(id, point, weight).map_err(|e| bad(e.to_string()))?);
    }

    if opts.dedupe {
        let mut seen = HashSet::new();
        points.retain(|p| seen.insert(p.coords().iter().map(|c| c.to_bits()).collect::<Vec<u64>>()));
    }
    if opts.shuffle {
        points.shuffle(&mut rng_from_seed(opts.shuffle_seed));
    }
    Ok(points)
}

/// Writes `id,weight,x0,..,x{d-1}` with a header row.
pub fn write_dataset<W: Write>(out: W, points: &[WeightedPoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let dim = points.first().map_or(0, WeightedPoint::dim);
    let mut header = vec!["id".to_string(), "weight".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let mut row = vec![p.id.0.to_string(), p.weight.to_string()];
        row.extend(p.coords().iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Usage(format!("csv: {other:?}")),
    }
}
