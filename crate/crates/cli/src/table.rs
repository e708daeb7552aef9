//! In-memory result tables and their CSV form.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Marker for a value that does not apply to a row.
pub const NA: &str = "NA";

/// A rectangular table of formatted cells with a header row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Formats a float with the shortest representation that parses back to
/// the same value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        NA.to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), fmt_f64)
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Row accessor by column name.
    pub fn row(&self, i: usize) -> RowView<'_> {
        RowView { table: self, index: i }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().context("flushing CSV buffer")
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.with_context(|| format!("CSV row {}", i + 1))?;
            if rec.len() != header.len() {
                bail!("CSV row {} has {} fields, header has {}", i + 1, rec.len(), header.len());
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_csv(&bytes)
    }
}

/// One row of a [`Table`], addressed by column name.
#[derive(Clone, Copy)]
pub struct RowView<'a> {
    table: &'a Table,
    index: usize,
}

impl<'a> RowView<'a> {
    /// 1-based data row number, as shown in reports.
    pub fn number(&self) -> usize {
        self.index + 1
    }

    pub fn str(&self, name: &str) -> Result<&'a str> {
        let c = self.table.column(name).with_context(|| format!("missing column {name:?}"))?;
        Ok(&self.table.rows[self.index][c])
    }

    /// Numeric cell; `NA` maps to `None`.
    pub fn opt(&self, name: &str) -> Result<Option<f64>> {
        let s = self.str(name)?;
        if s == NA {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .with_context(|| format!("row {}: column {name:?} is not a number: {s:?}", self.number()))
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        self.opt(name)?.with_context(|| format!("row {}: column {name:?} is NA", self.number()))
    }
}
