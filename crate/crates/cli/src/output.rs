//! Result tables and their CSV/JSON serialization. Every emitted document
//! carries a metadata record (version, command, seed, config echo) and a
//! header row naming the columns; identical config and seed produce
//! byte-identical output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::config::{Config, OutputFormat};

/// One table cell; floats keep full round-trip precision and non-finite
/// values serialize as strings.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    UInt(u64),
    Float(f64),
    Str(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::UInt(v) => v.to_string(),
            Cell::Float(v) => {
                if v.is_finite() {
                    format!("{v}")
                } else if v.is_nan() {
                    "nan".to_string()
                } else if *v > 0.0 {
                    "inf".to_string()
                } else {
                    "-inf".to_string()
                }
            }
            Cell::Str(s) => s.clone(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::UInt(v) => serializer.serialize_u64(*v),
            Cell::Float(v) if v.is_finite() => serializer.serialize_f64(*v),
            Cell::Float(_) => serializer.serialize_str(&self.render()),
            Cell::Str(s) => serializer.serialize_str(s),
        }
    }
}

/// Probability cell in linear scale; values below 1e-300 read 0.
pub fn linear_prob(ln: f64) -> Cell {
    let p = if ln < -690.775_527_898_213_7 { 0.0 } else { ln.exp() };
    Cell::Float(p)
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
}

/// A result table: named columns plus metadata.
#[derive(Debug)]
pub struct Table {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(command: &str, config: &Config, seed: Option<u64>, columns: Vec<String>) -> Self {
        Table {
            metadata: Metadata {
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                seed,
                config: config.values().clone(),
            },
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# haarcount {}", self.metadata.version)?;
        writeln!(w, "# command = {}", self.metadata.command)?;
        if let Some(seed) = self.metadata.seed {
            writeln!(w, "# seed = {seed}")?;
        }
        writeln!(
            w,
            "# config = {}",
            serde_json::to_string(&self.metadata.config)?
        )?;
        let mut csv = csv::WriterBuilder::new().from_writer(w);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|c| c.render()))?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            metadata: &'a Metadata,
            rows: Vec<RowMap<'a>>,
        }
        struct RowMap<'a> {
            columns: &'a [String],
            row: &'a [Cell],
        }
        impl Serialize for RowMap<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.columns.len()))?;
                for (name, cell) in self.columns.iter().zip(self.row) {
                    map.serialize_entry(name, cell)?;
                }
                map.end()
            }
        }
        let doc = Doc {
            metadata: &self.metadata,
            rows: self
                .rows
                .iter()
                .map(|row| RowMap {
                    columns: &self.columns,
                    row,
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        Ok(())
    }

    /// Writes to the path (or stdout when `None`) in the requested format.
    pub fn emit(&self, path: Option<&Path>, format: OutputFormat) -> Result<()> {
        match path {
            Some(path) => {
                let file = std::fs::File::create(path)
                    .with_context(|| format!("cannot create {}", path.display()))?;
                let buffered = std::io::BufWriter::new(file);
                match format {
                    OutputFormat::Csv => self.write_csv(buffered),
                    OutputFormat::Json => self.write_json(buffered),
                }
            }
            None => {
                let stdout = std::io::stdout().lock();
                match format {
                    OutputFormat::Csv => self.write_csv(stdout),
                    OutputFormat::Json => self.write_json(stdout),
                }
            }
        }
    }
}

/// Column names `n1..nr` for the count-vector part of a row.
pub fn count_columns(bins: usize) -> Vec<String> {
    (1..=bins).map(|i| format!("n{i}")).collect()
}

pub fn count_cells(counts: &[u64]) -> impl Iterator<Item = Cell> + '_ {
    counts.iter().map(|&n| Cell::UInt(n))
}
