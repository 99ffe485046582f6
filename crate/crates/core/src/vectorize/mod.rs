//! Vocabulary construction and the numeric corpus representations:
//! TF and TF-IDF document-term matrices and the document×company×term tensor.

mod sparse_io;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDocument;
use crate::error::{Error, Result};
use crate::par;

pub use sparse_io::{read_sparse, write_sparse, SparseExport, SparseText};

/// Term ↔ index bijection with document frequencies.
///
/// Indices are ordered by descending total corpus frequency, ties broken
/// lexicographically, so rebuilding from the same corpus gives the same
/// layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vocabulary {
    index_to_term: Vec<String>,
    doc_freq: Vec<usize>,
    term_freq: Vec<u64>,
    #[serde(skip)]
    term_to_index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.index_to_term.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_term.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.index_to_term[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.index_to_term
    }

    /// Number of documents containing each term.
    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    /// Total occurrences of each term across the corpus.
    pub fn term_freq(&self) -> &[u64] {
        &self.term_freq
    }
}

/// Builds the vocabulary, dropping terms that occur in fewer than `min_df` documents.
pub fn build_vocabulary(docs: &[TokenizedDocument], min_df: usize) -> Result<Vocabulary> {
    if min_df == 0 {
        return Err(Error::InvalidInput("min_df must be at least 1".into()));
    }
    if docs.iter().all(TokenizedDocument::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    let mut stats: BTreeMap<&str, (usize, u64)> = BTreeMap::new();
    for doc in docs {
        let mut seen = BTreeSet::new();
        for tok in &doc.tokens {
            let entry = stats.entry(tok.as_str()).or_default();
            entry.1 += 1;
            if seen.insert(tok.as_str()) {
                entry.0 += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize, u64)> = stats
        .into_iter()
        .filter(|(_, (df, _))| *df >= min_df)
        .map(|(t, (df, tf))| (t, df, tf))
        .collect();
    // BTreeMap iteration is already lexicographic; a stable sort keeps it for ties.
    kept.sort_by_key(|k| std::cmp::Reverse(k.2));

    let index_to_term: Vec<String> = kept.iter().map(|(t, _, _)| t.to_string()).collect();
    let term_to_index = index_to_term
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        doc_freq: kept.iter().map(|k| k.1).collect(),
        term_freq: kept.iter().map(|k| k.2).collect(),
        index_to_term,
        term_to_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Tf,
    Tfidf,
}

/// Sparse nonnegative document×term matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    n_docs: usize,
    n_terms: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    weighting: Weighting,
}

impl DocTermMatrix {
    /// Assembles a matrix from per-row `(column, value)` lists.
    ///
    /// Columns within a row are sorted; explicit zeros are dropped.
    pub fn from_rows(
        n_terms: usize,
        rows: Vec<Vec<(usize, f64)>>,
        weighting: Weighting,
    ) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows.into_iter() {
            row.sort_by_key(|&(c, _)| c);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidInput(format!("duplicate column {}", w[0].0)));
                }
            }
            for (c, v) in row {
                if c >= n_terms {
                    return Err(Error::DimensionMismatch {
                        expected: format!("column < {n_terms}"),
                        found: c.to_string(),
                    });
                }
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "entry {v} is not a finite nonnegative value"
                    )));
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            n_docs: indptr.len() - 1,
            n_terms,
            indptr,
            indices,
            values,
            weighting,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_docs, self.n_terms)
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    /// Column indices and values of row `d`.
    pub fn row(&self, d: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[d]..self.indptr[d + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, d: usize, t: usize) -> f64 {
        let (cols, vals) = self.row(d);
        cols.binary_search(&t).map(|i| vals[i]).unwrap_or(0.0)
    }

    /// Iterates `(row, column, value)` over stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_docs).flat_map(move |d| {
            let (cols, vals) = self.row(d);
            cols.iter().zip(vals).map(move |(&c, &v)| (d, c, v))
        })
    }

    pub fn row_sum(&self, d: usize) -> f64 {
        self.row(d).1.iter().sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_docs, self.n_terms));
        for (d, t, v) in self.iter() {
            out[[d, t]] = v;
        }
        out
    }

    /// Indices of rows with no stored entries.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.n_docs)
            .filter(|&d| self.indptr[d] == self.indptr[d + 1])
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }
}

fn count_row(doc: &TokenizedDocument, vocab: &Vocabulary) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for tok in &doc.tokens {
        if let Some(i) = vocab.index_of(tok) {
            *counts.entry(i).or_default() += 1;
        }
    }
    counts.into_iter().map(|(i, c)| (i, c as f64)).collect()
}

/// Raw term counts; out-of-vocabulary tokens are skipped.
pub fn tf_matrix(docs: &[TokenizedDocument], vocab: &Vocabulary) -> DocTermMatrix {
    let rows = par::map_slice(docs, |d| count_row(d, vocab));
    DocTermMatrix::from_rows(vocab.len(), rows, Weighting::Tf)
        .expect("vocabulary indices are in range and counts are finite")
}

/// Smoothed inverse document frequency: `ln((1 + n_docs) / (1 + df)) + 1`.
pub fn smooth_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// TF scaled by smoothed IDF, each row then L2-normalized (zero rows stay zero).
pub fn tfidf_matrix(docs: &[TokenizedDocument], vocab: &Vocabulary) -> DocTermMatrix {
    tfidf_from_tf(&tf_matrix(docs, vocab))
}

/// TF-IDF weighting of an existing TF matrix; document frequencies are
/// counted from the matrix rows.
pub fn tfidf_from_tf(tf: &DocTermMatrix) -> DocTermMatrix {
    let mut df = vec![0usize; tf.n_terms];
    for &c in &tf.indices {
        df[c] += 1;
    }
    let idf: Vec<f64> = df.iter().map(|&f| smooth_idf(tf.n_docs, f)).collect();
    let rows = (0..tf.n_docs)
        .map(|d| {
            let (cols, vals) = tf.row(d);
            let weighted: Vec<(usize, f64)> = cols
                .iter()
                .zip(vals)
                .map(|(&c, &v)| (c, v * idf[c]))
                .collect();
            let norm = weighted.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                weighted.into_iter().map(|(c, v)| (c, v / norm)).collect()
            } else {
                weighted
            }
        })
        .collect();
    DocTermMatrix::from_rows(tf.n_terms, rows, Weighting::Tfidf)
        .expect("tf-idf of a valid tf matrix is valid")
}

/// One stored cell of the document×company×term tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub doc: usize,
    pub company: usize,
    pub term: usize,
    pub value: f64,
}

/// Sparse 3-way tensor `X[d, c, t]`; each document occupies exactly one
/// company slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DocCompanyTermTensor {
    n_docs: usize,
    n_terms: usize,
    company_ids: Vec<String>,
    company_index: BTreeMap<String, usize>,
    doc_company: Vec<usize>,
    entries: Vec<TensorEntry>,
}

impl DocCompanyTermTensor {
    /// Builds a tensor from coordinate entries. `doc_company[d]` is the
    /// company slice of document `d`; every entry must lie in that slice.
    pub fn from_entries(
        shape: (usize, usize, usize),
        doc_company: Vec<usize>,
        mut entries: Vec<TensorEntry>,
    ) -> Result<Self> {
        let (n_docs, n_companies, n_terms) = shape;
        if doc_company.len() != n_docs {
            return Err(Error::DimensionMismatch {
                expected: format!("{n_docs} document companies"),
                found: doc_company.len().to_string(),
            });
        }
        if let Some(&c) = doc_company.iter().find(|&&c| c >= n_companies) {
            return Err(Error::DimensionMismatch {
                expected: format!("company < {n_companies}"),
                found: c.to_string(),
            });
        }
        for e in &entries {
            if e.doc >= n_docs || e.term >= n_terms || e.company != doc_company[e.doc] {
                return Err(Error::InvalidInput(format!(
                    "entry ({}, {}, {}) is outside the document's company slice or the tensor shape",
                    e.doc, e.company, e.term
                )));
            }
            if !e.value.is_finite() || e.value < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "entry value {} is invalid",
                    e.value
                )));
            }
        }
        entries.retain(|e| e.value != 0.0);
        entries.sort_by_key(|e| (e.doc, e.company, e.term));
        let company_ids: Vec<String> = (0..n_companies).map(|c| c.to_string()).collect();
        let company_index = company_ids
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(Self {
            n_docs,
            n_terms,
            company_ids,
            company_index,
            doc_company,
            entries,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_docs, self.company_ids.len(), self.n_terms)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    pub fn company_ids(&self) -> &[String] {
        &self.company_ids
    }

    pub fn company_index(&self, company_id: &str) -> Option<usize> {
        self.company_index.get(company_id).copied()
    }

    /// Company slice index of each document.
    pub fn doc_company(&self) -> &[usize] {
        &self.doc_company
    }

    pub fn get(&self, d: usize, c: usize, t: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(d, c, t), |e| (e.doc, e.company, e.term))
            .map(|i| self.entries[i].value)
            .unwrap_or(0.0)
    }

    /// Sum over the company axis, as a document×term matrix.
    pub fn company_marginal(&self, weighting: Weighting) -> DocTermMatrix {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n_docs];
        for e in &self.entries {
            *rows[e.doc].entry(e.term).or_default() += e.value;
        }
        let rows = rows.into_iter().map(|r| r.into_iter().collect()).collect();
        DocTermMatrix::from_rows(self.n_terms, rows, weighting)
            .expect("marginal of a valid tensor is valid")
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.value * e.value).sum()
    }

    fn with_company_ids(mut self, ids: Vec<String>) -> Self {
        self.company_index = ids
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        self.company_ids = ids;
        self
    }
}

/// Places each document's TF row in its company's slice.
///
/// Company indices follow the lexicographic order of the company ids that
/// occur among `docs`.
pub fn build_tensor(
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
    company_map: &BTreeMap<String, String>,
) -> Result<DocCompanyTermTensor> {
    let doc_companies: Vec<&String> = docs
        .iter()
        .map(|d| {
            company_map
                .get(&d.doc_id)
                .ok_or_else(|| Error::UnknownCompany {
                    doc_id: d.doc_id.clone(),
                })
        })
        .collect::<Result<_>>()?;
    let ids: Vec<String> = doc_companies
        .iter()
        .map(|c| (*c).clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let doc_company: Vec<usize> = doc_companies.iter().map(|c| index[c.as_str()]).collect();

    let tf = tf_matrix(docs, vocab);
    let entries = tf
        .iter()
        .map(|(d, t, value)| TensorEntry {
            doc: d,
            company: doc_company[d],
            term: t,
            value,
        })
        .collect();
    let tensor = DocCompanyTermTensor::from_entries(
        (docs.len(), ids.len(), vocab.len()),
        doc_company,
        entries,
    )?;
    Ok(tensor.with_company_ids(ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, tokens: &[&str]) -> TokenizedDocument {
        TokenizedDocument {
            doc_id: id.into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn vocabulary_counts() {
        let docs = [doc("a", &["coal", "seam"]), doc("b", &["coal"])];
        let v = build_vocabulary(&docs, 1).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.doc_freq()[v.index_of("coal").unwrap()], 2);
        assert_eq!(v.doc_freq()[v.index_of("seam").unwrap()], 1);

        let v = build_vocabulary(&docs, 2).unwrap();
        assert_eq!(v.terms(), ["coal"]);
    }

    #[test]
    fn vocabulary_order_is_frequency_then_lexicographic() {
        let docs = [doc(
            "a",
            &["zinc", "gold", "gold", "basin", "zinc", "apple"],
        )];
        let v = build_vocabulary(&docs, 1).unwrap();
        assert_eq!(v.terms(), ["gold", "zinc", "apple", "basin"]);
        for (i, t) in v.terms().iter().enumerate() {
            assert_eq!(v.index_of(t), Some(i));
        }
    }

    #[test]
    fn vocabulary_rejects_empty_corpus() {
        assert!(matches!(build_vocabulary(&[], 1), Err(Error::EmptyCorpus)));
        assert!(matches!(
            build_vocabulary(&[doc("a", &[])], 1),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn tf_row() {
        let docs = [
            doc("a", &["coal", "coal", "seam"]),
            doc("b", &["seam", "rock"]),
            doc("c", &[]),
        ];
        let v = build_vocabulary(&docs, 1).unwrap();
        let tf = tf_matrix(&docs, &v);
        let coal = v.index_of("coal").unwrap();
        let seam = v.index_of("seam").unwrap();
        assert_eq!(tf.get(0, coal), 2.0);
        assert_eq!(tf.get(0, seam), 1.0);
        assert_eq!(tf.row_sum(0), 3.0);
        assert_eq!(tf.empty_rows(), [2]);
        assert!(tf.is_integral());
    }

    #[test]
    fn tfidf_single_doc_is_normalized_tf() {
        let docs = [doc("a", &["coal", "coal", "seam"])];
        let v = build_vocabulary(&docs, 1).unwrap();
        let x = tfidf_matrix(&docs, &v);
        let norm = 5f64.sqrt();
        assert!((x.get(0, v.index_of("coal").unwrap()) - 2.0 / norm).abs() < 1e-15);
        assert!((x.get(0, v.index_of("seam").unwrap()) - 1.0 / norm).abs() < 1e-15);
    }

    #[test]
    fn idf_floor_is_one() {
        assert_eq!(smooth_idf(7, 7), 1.0);
        assert!(smooth_idf(7, 1) > 1.0);
    }

    #[test]
    fn tensor_places_rows_in_company_slices() {
        let docs = [doc("a", &["coal", "seam"]), doc("b", &["gold"])];
        let v = build_vocabulary(&docs, 1).unwrap();
        let map: BTreeMap<String, String> = [
            ("a".to_string(), "zeta".to_string()),
            ("b".to_string(), "alpha".to_string()),
        ]
        .into();
        let x = build_tensor(&docs, &v, &map).unwrap();
        assert_eq!(x.shape(), (2, 2, 3));
        assert_eq!(x.company_ids(), ["alpha", "zeta"]);
        assert_eq!(x.doc_company(), [1, 0]);
        assert_eq!(x.get(0, 1, v.index_of("coal").unwrap()), 1.0);
        assert_eq!(x.get(0, 0, v.index_of("coal").unwrap()), 0.0);
        assert_eq!(x.get(1, 0, v.index_of("gold").unwrap()), 1.0);
        assert_eq!(x.nnz(), tf_matrix(&docs, &v).nnz());
        assert_eq!(x.company_marginal(Weighting::Tf), tf_matrix(&docs, &v));
    }

    #[test]
    fn tensor_unknown_company() {
        let docs = [doc("a", &["coal"])];
        let v = build_vocabulary(&docs, 1).unwrap();
        let err = build_tensor(&docs, &v, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::UnknownCompany { doc_id } if doc_id == "a"));
    }

    #[test]
    fn entries_outside_company_slice_are_rejected() {
        let e = TensorEntry {
            doc: 0,
            company: 1,
            term: 0,
            value: 1.0,
        };
        assert!(DocCompanyTermTensor::from_entries((1, 2, 1), vec![0], vec![e]).is_err());
    }
}
