//! Plain-text sparse exchange format.
//!
//! ```text
//! dims D V [C]
//! row col [slab] value
//! ...
//! ```
//!
//! Matrices write `row col value`; tensors write `doc term company value`
//! with the header `dims D V C`. Lines are sorted by their integer
//! coordinates and values use 12 significant digits.

use std::fmt::Write as _;

use super::{DocCompanyTermTensor, DocTermMatrix};
use crate::error::{Error, Result};
use crate::numfmt::fmt_f64;

/// Parsed content of a sparse text file.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseText {
    /// `[D, V]` or `[D, V, C]`.
    pub dims: Vec<usize>,
    /// Coordinates (2 or 3 per entry) and value.
    pub entries: Vec<(Vec<usize>, f64)>,
}

/// Anything that can be written in the sparse text format.
pub trait SparseExport {
    fn sparse_text(&self) -> String;
}

impl SparseExport for DocTermMatrix {
    fn sparse_text(&self) -> String {
        let (d, v) = self.shape();
        let mut out = format!("dims {d} {v}\n");
        for (row, col, value) in self.iter() {
            let _ = writeln!(out, "{row} {col} {}", fmt_f64(value));
        }
        out
    }
}

impl SparseExport for DocCompanyTermTensor {
    fn sparse_text(&self) -> String {
        let (d, c, v) = self.shape();
        let mut out = format!("dims {d} {v} {c}\n");
        let mut entries: Vec<_> = self.entries().to_vec();
        entries.sort_by_key(|e| (e.doc, e.term, e.company));
        for e in entries {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                e.doc,
                e.term,
                e.company,
                fmt_f64(e.value)
            );
        }
        out
    }
}

pub fn write_sparse<T: SparseExport + ?Sized>(item: &T) -> String {
    item.sparse_text()
}

/// Parses the sparse text format. Coordinates must be in range and sorted.
pub fn read_sparse(text: &str) -> Result<SparseText> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: &str| {
        Error::InvalidInput(format!("sparse text line {}: {msg}", line + 1))
    };

    let (hline, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(bad(hline, "header must start with \"dims\""));
    }
    let dims: Vec<usize> = parts
        .map(|p| {
            p.parse()
                .map_err(|_| bad(hline, "dimension is not an integer"))
        })
        .collect::<Result<_>>()?;
    if !(2..=3).contains(&dims.len()) {
        return Err(bad(hline, "expected 2 or 3 dimensions"));
    }

    let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dims.len() + 1 {
            return Err(bad(ln, "wrong number of fields"));
        }
        let coords: Vec<usize> = fields[..dims.len()]
            .iter()
            .map(|f| {
                f.parse()
                    .map_err(|_| bad(ln, "coordinate is not an integer"))
            })
            .collect::<Result<_>>()?;
        if coords.iter().zip(&dims).any(|(c, d)| c >= d) {
            return Err(bad(ln, "coordinate out of range"));
        }
        let value: f64 = fields[dims.len()]
            .parse()
            .map_err(|_| bad(ln, "value is not a number"))?;
        if let Some((prev, _)) = entries.last() {
            if *prev >= coords {
                return Err(bad(ln, "entries are not strictly sorted"));
            }
        }
        entries.push((coords, value));
    }
    Ok(SparseText { dims, entries })
}
