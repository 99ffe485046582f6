//! Scoring of topic-model outputs: argmax grouping, silhouette analysis,
//! keyword matching between model topics and document groups, and
//! decisiveness of the document-topic weights.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::vectorize::{DocTermMatrix, Vocabulary};

/// Hard assignment of entities (documents or companies) to topics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub entity_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Assignment {
    /// Number of entities per topic, including empty topics.
    pub fn topic_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Labels each row with the index of its largest weight; ties go to the
/// lowest index.
pub fn argmax_assign(weights: ArrayView2<'_, f64>, ids: &[String]) -> Result<Assignment> {
    let (n, k) = weights.dim();
    if n == 0 || k == 0 {
        return Err(Error::InvalidInput("argmax over an empty matrix".into()));
    }
    if ids.len() != n {
        return Err(Error::LengthMismatch {
            left: ids.len(),
            right: n,
        });
    }
    let mut labels = Vec::with_capacity(n);
    for (i, row) in weights.outer_iter().enumerate() {
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite(format!("NaN weight in row {i}")));
        }
        let mut best = 0;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        labels.push(best);
    }
    Ok(Assignment {
        entity_ids: ids.to_vec(),
        labels,
        k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    fn distance(self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteResult {
    pub per_sample: Vec<f64>,
    pub mean: f64,
    /// Number of distinct labels present.
    pub k: usize,
    pub distance: Metric,
}

/// Silhouette coefficient `(b − a) / max(a, b)` of every sample.
///
/// `a` is the mean distance to the other members of the sample's cluster and
/// `b` the smallest mean distance to any other cluster. Members of singleton
/// clusters score 0.
pub fn silhouette(
    points: ArrayView2<'_, f64>,
    labels: &[usize],
    metric: Metric,
) -> Result<SilhouetteResult> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: n,
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: n,
        });
    }
    // Dense relabeling so cluster sums can live in a vector.
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::SingleCluster);
    }
    let index: BTreeMap<usize, usize> = distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let dense: Vec<usize> = labels.iter().map(|l| index[l]).collect();
    let n_clusters = distinct.len();
    let mut sizes = vec![0usize; n_clusters];
    for &c in &dense {
        sizes[c] += 1;
    }

    let per_sample = par::map_range(n, |i| {
        let own = dense[i];
        if sizes[own] == 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; n_clusters];
        let xi = points.row(i);
        for j in 0..n {
            if j != i {
                sums[dense[j]] += metric.distance(xi, points.row(j));
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            (b - a) / denom
        } else {
            0.0
        }
    });
    let mean = per_sample.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteResult {
        per_sample,
        mean,
        k: n_clusters,
        distance: metric,
    })
}

/// Indices of the `n` largest values, ties broken by the term string.
fn rank_terms(weights: impl Iterator<Item = f64>, vocab: &Vocabulary, n: usize) -> Vec<String> {
    let mut order: Vec<(usize, f64)> = weights.enumerate().collect();
    order.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| vocab.term(a.0).cmp(vocab.term(b.0)))
    });
    order
        .into_iter()
        .take(n)
        .map(|(t, _)| vocab.term(t).to_string())
        .collect()
}

/// The `n` highest-weight terms of every topic row.
pub fn top_keywords(
    topic_term: ArrayView2<'_, f64>,
    vocab: &Vocabulary,
    n: usize,
) -> Result<Vec<Vec<String>>> {
    let v = topic_term.ncols();
    if v != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} term columns", vocab.len()),
            found: v.to_string(),
        });
    }
    if n > v {
        return Err(Error::TooManyTerms {
            requested: n,
            available: v,
        });
    }
    Ok(topic_term
        .outer_iter()
        .map(|row| rank_terms(row.iter().copied(), vocab, n))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTerms {
    /// Per group, the `n` most frequent terms; empty for empty groups.
    pub terms: Vec<Vec<String>>,
    /// Groups that received no documents.
    pub empty_groups: Vec<usize>,
}

/// Ranks terms by their summed count over each group's documents.
///
/// Every non-empty group gets exactly `n` terms; when fewer than `n` terms
/// occur in the group, the list is completed with zero-count terms in
/// lexicographic order.
pub fn group_frequent_terms(
    tf: &DocTermMatrix,
    vocab: &Vocabulary,
    assignment: &Assignment,
    n: usize,
) -> Result<GroupTerms> {
    if assignment.len() != tf.n_docs() {
        return Err(Error::LengthMismatch {
            left: assignment.len(),
            right: tf.n_docs(),
        });
    }
    if tf.n_terms() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} term columns", vocab.len()),
            found: tf.n_terms().to_string(),
        });
    }
    if n > vocab.len() {
        return Err(Error::TooManyTerms {
            requested: n,
            available: vocab.len(),
        });
    }
    let mut totals = Array2::<f64>::zeros((assignment.k, vocab.len()));
    for (d, t, v) in tf.iter() {
        totals[[assignment.labels[d], t]] += v;
    }
    let sizes = assignment.topic_sizes();
    let mut terms = Vec::with_capacity(assignment.k);
    let mut empty_groups = Vec::new();
    for (g, row) in totals.outer_iter().enumerate() {
        if sizes[g] == 0 {
            empty_groups.push(g);
            terms.push(Vec::new());
        } else {
            terms.push(rank_terms(row.iter().copied(), vocab, n));
        }
    }
    Ok(GroupTerms {
        terms,
        empty_groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordMatch {
    /// Ratio per topic; `None` when the topic's group is empty.
    pub per_topic: Vec<Option<f64>>,
    /// Mean over defined ratios; `None` when every group is empty.
    pub mean: Option<f64>,
}

/// `|model ∩ group| / n` for a single topic. An empty group yields `None`.
pub fn keyword_match_ratio(
    model_keywords: &[String],
    group_terms: &[String],
) -> Result<Option<f64>> {
    if group_terms.is_empty() {
        return Ok(None);
    }
    if model_keywords.len() != group_terms.len() {
        return Err(Error::LengthMismatch {
            left: model_keywords.len(),
            right: group_terms.len(),
        });
    }
    let a: BTreeSet<&String> = model_keywords.iter().collect();
    let b: BTreeSet<&String> = group_terms.iter().collect();
    Ok(Some(
        a.intersection(&b).count() as f64 / model_keywords.len() as f64,
    ))
}

/// Keyword match for every topic, with the mean over non-empty groups.
pub fn keyword_match(
    model_keywords: &[Vec<String>],
    group_terms: &[Vec<String>],
) -> Result<KeywordMatch> {
    if model_keywords.len() != group_terms.len() {
        return Err(Error::LengthMismatch {
            left: model_keywords.len(),
            right: group_terms.len(),
        });
    }
    let per_topic = model_keywords
        .iter()
        .zip(group_terms)
        .map(|(m, g)| keyword_match_ratio(m, g))
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = per_topic.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(KeywordMatch { per_topic, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisiveness {
    /// Mean over rows of the population standard deviation of each
    /// L1-normalized row.
    pub mean_std: f64,
    /// Rows whose weights sum to zero; left out of the mean.
    pub zero_rows: Vec<usize>,
}

/// Average per-row spread of a document-topic matrix.
///
/// Rows are scaled to sum to one first so that probability outputs and
/// unnormalized loadings are comparable. Ranges from 0 (uniform rows) to
/// `√(K−1)/K` (one-hot rows).
pub fn decisiveness(doc_topic: ArrayView2<'_, f64>) -> Result<Decisiveness> {
    let k = doc_topic.ncols();
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "decisiveness needs K >= 2, got {k}"
        )));
    }
    let mut zero_rows = Vec::new();
    let mut stds = Vec::new();
    for (i, row) in doc_topic.outer_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "row {i} of the document-topic matrix"
            )));
        }
        let total: f64 = row.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            zero_rows.push(i);
            continue;
        }
        let p: Vec<f64> = row.iter().map(|v| v / total).collect();
        let mean = p.iter().sum::<f64>() / k as f64;
        let var = p.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k as f64;
        stds.push(var.sqrt());
    }
    let mean_std = if stds.is_empty() {
        0.0
    } else {
        stds.iter().sum::<f64>() / stds.len() as f64
    };
    Ok(Decisiveness {
        mean_std,
        zero_rows,
    })
}

/// Contingency table `table[a][b]` counting entities with label `a` in
/// `rows` and label `b` in `cols`.
pub fn crosstab(
    rows: &[usize],
    n_rows: usize,
    cols: &[usize],
    n_cols: usize,
) -> Result<Vec<Vec<usize>>> {
    if rows.len() != cols.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: cols.len(),
        });
    }
    let mut table = vec![vec![0usize; n_cols]; n_rows];
    for (&r, &c) in rows.iter().zip(cols) {
        if r >= n_rows || c >= n_cols {
            return Err(Error::InvalidInput(format!(
                "label pair ({r}, {c}) outside a {n_rows}x{n_cols} table"
            )));
        }
        table[r][c] += 1;
    }
    Ok(table)
}

/// Fraction of entities whose predicted cluster's majority reference label
/// matches their own reference label.
pub fn purity(predicted: &[usize], reference: &[usize]) -> Result<f64> {
    if predicted.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: reference.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::TooFewSamples {
            needed: 1,
            found: 0,
        });
    }
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&p, &r) in predicted.iter().zip(reference) {
        *counts.entry(p).or_default().entry(r).or_default() += 1;
    }
    let hits: usize = counts
        .values()
        .map(|m| m.values().copied().max().unwrap_or(0))
        .sum();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Per-topic summary of one assignment, as stored in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSummary {
    pub topic_sizes: Vec<usize>,
    /// Company ids in row order of `company_topic_counts`.
    pub companies: Vec<String>,
    /// Documents per (company, topic).
    pub company_topic_counts: Vec<Vec<usize>>,
}

/// All evaluation numbers for one fitted (method, K) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub k: usize,
    /// Mean document silhouette; `None` when it is undefined (K < 2 or a
    /// single occupied topic).
    pub silhouette: Option<f64>,
    /// Mean company silhouette, tensor method only.
    pub company_silhouette: Option<f64>,
    pub keyword_match: KeywordMatch,
    pub keywords: Vec<Vec<String>>,
    pub group_terms: Vec<Vec<String>>,
    pub empty_groups: Vec<usize>,
    pub decisiveness: Option<f64>,
    pub decisiveness_zero_rows: Vec<usize>,
    pub assignment: AssignmentSummary,
    pub notices: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i}")).collect()
    }

    #[test]
    fn argmax_examples() {
        let w = array![[0.1, 0.7, 0.2], [0.5, 0.5, 0.0]];
        let a = argmax_assign(w.view(), &ids(2)).unwrap();
        assert_eq!(a.labels, vec![1, 0]);
        assert_eq!(a.topic_sizes(), vec![1, 1, 0]);
    }

    #[test]
    fn argmax_rejects_nan_and_empty() {
        let w = array![[0.1, f64::NAN]];
        assert!(matches!(
            argmax_assign(w.view(), &ids(1)),
            Err(Error::NonFinite(_))
        ));
        let e = Array2::<f64>::zeros((0, 2));
        assert!(argmax_assign(e.view(), &[]).is_err());
    }

    #[test]
    fn silhouette_separated_clusters() {
        let p = array![[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
        let s = silhouette(p.view(), &[0, 0, 1, 1], Metric::Euclidean).unwrap();
        assert!(s.per_sample.iter().all(|&v| v > 0.9));
        assert!(s.mean > 0.9);
        assert_eq!(s.k, 2);
    }

    #[test]
    fn silhouette_equidistant_is_zero() {
        // Sample 1 sits at distance 1 from its co-member and from the other cluster.
        let p = array![[0.0], [1.0], [2.0]];
        let s = silhouette(p.view(), &[0, 0, 1], Metric::Euclidean).unwrap();
        assert_abs_diff_eq!(s.per_sample[1], 0.0);
        assert_eq!(s.per_sample[2], 0.0, "singleton scores zero");
    }

    #[test]
    fn silhouette_errors() {
        let p = array![[0.0], [1.0]];
        assert!(matches!(
            silhouette(p.view(), &[0, 0], Metric::Euclidean),
            Err(Error::SingleCluster)
        ));
        let one = array![[0.0]];
        assert!(matches!(
            silhouette(one.view(), &[0], Metric::Euclidean),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn keyword_ratio_examples() {
        let a: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
        let b: Vec<String> = ["p", "q", "r"].map(String::from).to_vec();
        assert_eq!(keyword_match_ratio(&a, &a).unwrap(), Some(1.0));
        assert_eq!(keyword_match_ratio(&a, &b).unwrap(), Some(0.0));
        assert_eq!(keyword_match_ratio(&a, &[]).unwrap(), None);
        assert!(keyword_match_ratio(&a, &b[..2]).is_err());
    }

    #[test]
    fn keyword_mean_skips_empty_groups() {
        let a: Vec<String> = ["x", "y"].map(String::from).to_vec();
        let m = keyword_match(&[a.clone(), a.clone()], &[a.clone(), vec![]]).unwrap();
        assert_eq!(m.per_topic, vec![Some(1.0), None]);
        assert_eq!(m.mean, Some(1.0));
    }

    #[test]
    fn decisiveness_bounds() {
        for k in 2..7 {
            let one_hot =
                Array2::from_shape_fn((3, k), |(i, j)| if j == i % k { 2.5 } else { 0.0 });
            let d = decisiveness(one_hot.view()).unwrap();
            assert_abs_diff_eq!(
                d.mean_std,
                ((k - 1) as f64).sqrt() / k as f64,
                epsilon = 1e-12
            );
            let uniform = Array2::from_elem((3, k), 1.0 / k as f64);
            assert_abs_diff_eq!(
                decisiveness(uniform.view()).unwrap().mean_std,
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn decisiveness_flags_zero_rows() {
        let m = array![[0.0, 0.0], [1.0, 0.0]];
        let d = decisiveness(m.view()).unwrap();
        assert_eq!(d.zero_rows, vec![0]);
        assert_abs_diff_eq!(d.mean_std, 0.5);
        assert!(decisiveness(array![[1.0], [2.0]].view()).is_err());
    }

    #[test]
    fn purity_and_crosstab() {
        assert_eq!(purity(&[0, 0, 1, 1], &[5, 5, 7, 7]).unwrap(), 1.0);
        assert_eq!(purity(&[0, 0, 0, 0], &[5, 5, 7, 7]).unwrap(), 0.5);
        let t = crosstab(&[0, 0, 1], 2, &[1, 1, 0], 2).unwrap();
        assert_eq!(t, vec![vec![0, 2], vec![1, 0]]);
    }
}
