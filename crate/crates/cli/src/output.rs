//! CSV, JSON and SVG writers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::svg::{line_chart, Series};

/// A numeric table; the first column is the x axis of its chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(headers: &[S]) -> Self {
        Self { headers: headers.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes `<stem>.csv`, and `<stem>.svg` plotting every column against the first.
pub fn write_table(dir: &Path, stem: &str, title: &str, table: &Table) -> anyhow::Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;

    let series: Vec<Series> = (1..table.headers.len())
        .map(|c| Series { name: &table.headers[c], points: table.rows.iter().map(|r| (r[0], r[c])).collect() })
        .collect();
    let svg_path = dir.join(format!("{stem}.svg"));
    fs::write(&svg_path, line_chart(title, &table.headers[0], &series))
        .with_context(|| format!("writing {}", svg_path.display()))?;
    Ok(vec![csv_path, svg_path])
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Reads one numeric column: `x` if present, otherwise the last column.
pub fn read_samples(path: &Path) -> anyhow::Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = headers.iter().position(|h| h == "x").unwrap_or(headers.len().saturating_sub(1));
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(col).with_context(|| format!("{}: row {} is short", path.display(), i + 1))?;
        out.push(field.trim().parse::<f64>().with_context(|| format!("{}: row {}: `{field}`", path.display(), i + 1))?);
    }
    Ok(out)
}
