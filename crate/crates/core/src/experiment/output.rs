//! Atomic file output and the CSV layouts of the result tree.

use std::io::Write;
use std::path::Path;

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numfmt::fmt_f64;

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Builds a CSV document in memory.
pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new<I, S>(header: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        write_atomic(path, &self.into_bytes()?)
    }
}

pub fn opt(value: Option<f64>) -> String {
    value.map(fmt_f64).unwrap_or_default()
}

fn topic_header(first: &str, k: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((0..k).map(|t| format!("topic_{t}")))
        .collect()
}

/// One row per entity: its id, then one column per topic.
pub fn entity_topic_csv(
    id_column: &str,
    ids: &[String],
    weights: ArrayView2<'_, f64>,
) -> Result<CsvTable> {
    let mut table = CsvTable::new(topic_header(id_column, weights.ncols()))?;
    for (id, row) in ids.iter().zip(weights.outer_iter()) {
        table.row(std::iter::once(id.clone()).chain(row.iter().map(|&v| fmt_f64(v))))?;
    }
    Ok(table)
}

/// One row per topic: its index, then one column per term.
pub fn topic_term_csv(terms: &[String], weights: ArrayView2<'_, f64>) -> Result<CsvTable> {
    let header = std::iter::once("topic".to_string()).chain(terms.iter().cloned());
    let mut table = CsvTable::new(header)?;
    for (t, row) in weights.outer_iter().enumerate() {
        table.row(std::iter::once(t.to_string()).chain(row.iter().map(|&v| fmt_f64(v))))?;
    }
    Ok(table)
}
