//! Independent scalar reference implementations and seeded instance
//! generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicbench::corpus::TokenizedDocument;
use topicbench::vectorize::{DocCompanyTermTensor, TensorEntry};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random tokenized corpus: up to `max_docs` non-empty documents over up to
/// `max_terms` distinct terms, each document owned by one of a few companies.
pub struct RandomCorpus {
    pub docs: Vec<TokenizedDocument>,
    pub companies: BTreeMap<String, String>,
}

pub fn random_corpus(seed: u64, max_docs: usize, max_terms: usize) -> RandomCorpus {
    let mut r = rng(seed);
    let n_docs = r.random_range(1..=max_docs);
    let n_terms = r.random_range(1..=max_terms);
    let n_companies = r.random_range(1..=n_docs.min(5));
    let mut docs = Vec::with_capacity(n_docs);
    let mut companies = BTreeMap::new();
    for d in 0..n_docs {
        let len = r.random_range(1..=30);
        let tokens = (0..len)
            .map(|_| format!("t{:02}", r.random_range(0..n_terms)))
            .collect();
        let doc_id = format!("d{d:03}");
        companies.insert(
            doc_id.clone(),
            format!("c{}", r.random_range(0..n_companies)),
        );
        docs.push(TokenizedDocument { doc_id, tokens });
    }
    RandomCorpus { docs, companies }
}

/// TF-IDF straight from the stated formula, keyed by (document, term string).
pub fn tfidf_oracle(docs: &[TokenizedDocument]) -> Vec<BTreeMap<String, f64>> {
    let n = docs.len() as f64;
    let counts: Vec<BTreeMap<String, f64>> = docs
        .iter()
        .map(|d| {
            let mut m = BTreeMap::new();
            for t in &d.tokens {
                *m.entry(t.clone()).or_insert(0.0) += 1.0;
            }
            m
        })
        .collect();
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for m in &counts {
        for t in m.keys() {
            *df.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
    }
    counts
        .iter()
        .map(|m| {
            let mut row: BTreeMap<String, f64> = m
                .iter()
                .map(|(t, c)| {
                    (
                        t.clone(),
                        c * (((1.0 + n) / (1.0 + df[t.as_str()])).ln() + 1.0),
                    )
                })
                .collect();
            let mut sq = 0.0;
            for v in row.values() {
                sq += v * v;
            }
            let norm = sq.sqrt();
            if norm > 0.0 {
                for v in row.values_mut() {
                    *v /= norm;
                }
            }
            row
        })
        .collect()
}

/// Silhouette of every sample by the textbook double loop.
pub fn silhouette_oracle(points: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
    let n = points.len();
    let dist = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for (a, b) in points[i].iter().zip(&points[j]) {
            s += (a - b) * (a - b);
        }
        s.sqrt()
    };
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let own: Vec<usize> = (0..n)
            .filter(|&j| j != i && labels[j] == labels[i])
            .collect();
        if own.is_empty() {
            out.push(0.0);
            continue;
        }
        let a = own.iter().map(|&j| dist(i, j)).sum::<f64>() / own.len() as f64;
        let mut b = f64::INFINITY;
        for &c in &clusters {
            if c == labels[i] {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let mean = members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64;
            b = b.min(mean);
        }
        let m = a.max(b);
        out.push(if m > 0.0 { (b - a) / m } else { 0.0 });
    }
    out
}

/// `‖X − [[A, B, C]]‖²` by looping over every cell of the dense tensor.
pub fn cp_error_oracle(
    x: &DocCompanyTermTensor,
    a: &Array2<f64>,
    b: &Array2<f64>,
    c: &Array2<f64>,
) -> f64 {
    let (nd, nc, nt) = x.shape();
    let k = a.ncols();
    let mut err = 0.0;
    for d in 0..nd {
        for s in 0..nc {
            for t in 0..nt {
                let mut m = 0.0;
                for r in 0..k {
                    m += a[[d, r]] * b[[s, r]] * c[[t, r]];
                }
                let diff = x.get(d, s, t) - m;
                err += diff * diff;
            }
        }
    }
    err
}

/// A sparse random tensor where every document lives in one company slice.
pub fn random_tensor(
    seed: u64,
    shape: (usize, usize, usize),
    nnz_per_doc: usize,
) -> DocCompanyTermTensor {
    let (nd, nc, nt) = shape;
    let mut r = rng(seed);
    let doc_company: Vec<usize> = (0..nd)
        .map(|d| if d < nc { d } else { r.random_range(0..nc) })
        .collect();
    let mut entries = Vec::new();
    for (d, &c) in doc_company.iter().enumerate() {
        let terms: BTreeSet<usize> = (0..nnz_per_doc).map(|_| r.random_range(0..nt)).collect();
        for t in terms {
            entries.push(TensorEntry {
                doc: d,
                company: c,
                term: t,
                value: r.random_range(1..=5) as f64,
            });
        }
    }
    DocCompanyTermTensor::from_entries(shape, doc_company, entries).expect("valid tensor")
}

/// Random nonnegative dense matrix with entries in `[0, 1)`.
pub fn random_matrix(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((rows, cols), || r.random::<f64>())
}

/// True when `next ≤ prev·(1 + tol)` for every consecutive pair.
pub fn non_increasing(trace: &[f64], tol: f64) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
}

/// True when every step is non-decreasing up to `tol` relative to its size.
pub fn non_decreasing(trace: &[f64], tol: f64) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - tol * w[0].abs())
}

/// Random integer count matrix with no empty rows.
pub fn random_tf(seed: u64, n_docs: usize, n_terms: usize) -> topicbench::vectorize::DocTermMatrix {
    use topicbench::vectorize::{DocTermMatrix, Weighting};
    let mut r = rng(seed);
    let rows = (0..n_docs)
        .map(|_| {
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for _ in 0..r.random_range(5..=25) {
                *row.entry(r.random_range(0..n_terms)).or_default() += 1.0;
            }
            row.into_iter().collect()
        })
        .collect();
    DocTermMatrix::from_rows(n_terms, rows, Weighting::Tf).expect("valid counts")
}
