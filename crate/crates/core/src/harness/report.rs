//! Plot-ready CSV rows, JSON summaries and the cross-algorithm comparison
//! table.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::csv_err;
use super::{Algorithm, RunRecord, RunSummary};
use crate::error::{Error, Result};

/// One CSV line: a timing bucket, a checkpoint, or both when they close at
/// the same operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub repeat: usize,
    pub op: usize,
    pub live: usize,
    pub ops: Option<usize>,
    pub time_ns: Option<f64>,
    pub distortion: Option<f64>,
    pub quality: Option<f64>,
}

const HEADER: [&str; 7] = ["repeat", "op", "live", "ops", "time_ns", "distortion", "quality"];

impl RunRecord {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows: Vec<ReportRow> = self
            .buckets
            .iter()
            .map(|b| ReportRow {
                repeat: self.repeat,
                op: b.op,
                live: b.live,
                ops: Some(b.ops),
                time_ns: Some(b.mean_ns),
                distortion: None,
                quality: None,
            })
            .collect();
        for c in &self.checkpoints {
            match rows.iter_mut().find(|r| r.op == c.op) {
                Some(r) => {
                    r.distortion = Some(c.report.distortion);
                    r.quality = Some(c.report.quality);
                }
                None => rows.push(ReportRow {
                    repeat: self.repeat,
                    op: c.op,
                    live: c.live,
                    ops: None,
                    time_ns: None,
                    distortion: Some(c.report.distortion),
                    quality: Some(c.report.quality),
                }),
            }
        }
        rows.sort_by_key(|r| r.op);
        rows
    }
}

impl RunSummary {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.runs.iter().flat_map(RunRecord::rows).collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Header row is always written, even with no rows.
pub fn write_rows_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, r) in reader.deserialize().enumerate() {
        rows.push(r.map_err(|e: csv::Error| Error::Parse { line: i + 2, msg: e.to_string() })?);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    /// `speedup`, `quality` or `distortion`.
    pub section: String,
    pub algorithm: Algorithm,
    pub values: Vec<Option<f64>>,
}

/// Speedup of the optimized dynamic structure over every other algorithm,
/// followed by quality and distortion per algorithm, one column per input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub columns: Vec<String>,
    pub rows: Vec<CompareRow>,
}

pub fn compare(summaries: &[RunSummary]) -> CompareTable {
    let mut columns: Vec<String> = Vec::new();
    for s in summaries {
        if !columns.contains(&s.label) {
            columns.push(s.label.clone());
        }
    }
    let find = |label: &str, a: Algorithm| summaries.iter().find(|s| s.label == label && s.config.algorithm == a);
    let present = |a: Algorithm| summaries.iter().any(|s| s.config.algorithm == a);

    let mut rows = Vec::new();
    for a in Algorithm::ALL.into_iter().filter(|&a| a != Algorithm::OptimizedDynamic && present(a)) {
        let values = columns
            .iter()
            .map(|c| Some(find(c, Algorithm::OptimizedDynamic)?.speedup_over(find(c, a)?)))
            .collect();
        rows.push(CompareRow { section: "speedup".into(), algorithm: a, values });
    }
    for (section, pick) in [
        ("quality", (|s: &RunSummary| s.aggregate.mean_quality) as fn(&RunSummary) -> f64),
        ("distortion", |s: &RunSummary| s.aggregate.mean_distortion),
    ] {
        for a in Algorithm::ALL.into_iter().filter(|&a| a != Algorithm::KmeansOnly && present(a)) {
            let values = columns.iter().map(|c| find(c, a).map(pick).filter(|v| !v.is_nan())).collect();
            rows.push(CompareRow { section: section.into(), algorithm: a, values });
        }
    }
    CompareTable { columns, rows }
}

/// Three significant digits.
fn fmt_value(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(v) if !v.is_finite() => v.to_string(),
        Some(v) => {
            let mag = if v == 0.0 { 0 } else { v.abs().log10().floor() as i32 };
            let decimals = (2 - mag).max(0) as usize;
            format!("{v:.decimals$}")
        }
    }
}

impl CompareTable {
    pub fn render_text(&self) -> String {
        let mut lines: Vec<Vec<String>> = vec![];
        let mut head = vec!["".to_string(), "".to_string()];
        head.extend(self.columns.iter().cloned());
        lines.push(head);
        for r in &self.rows {
            let mut line = vec![r.section.clone(), r.algorithm.short().to_string()];
            line.extend(r.values.iter().map(|v| fmt_value(*v)));
            lines.push(line);
        }
        let width = |j: usize| lines.iter().map(|l| l[j].len()).max().unwrap_or(0);
        let widths: Vec<usize> = (0..lines[0].len()).map(width).collect();
        let mut out = String::new();
        for l in &lines {
            let cells: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(j, c)| if j < 2 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let mut head = vec!["section".to_string(), "algorithm".to_string()];
        head.extend(self.columns.iter().cloned());
        w.write_record(&head).map_err(csv_err)?;
        for r in &self.rows {
            let mut line = vec![r.section.clone(), r.algorithm.name().to_string()];
            line.extend(r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&line).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}
