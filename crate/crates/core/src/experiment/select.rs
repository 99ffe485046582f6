use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::error::{Error, Result};

/// Headline numbers of one fitted (method, K) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub k: usize,
    pub silhouette: Option<f64>,
    pub keyword_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub method: Method,
    pub k: usize,
    pub silhouette: Option<f64>,
    pub keyword_ratio: Option<f64>,
    /// K values whose silhouette was within the margin of the best.
    pub candidates: Vec<usize>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub margin: f64,
    pub per_method: Vec<Choice>,
    pub overall: Choice,
}

/// Missing values rank below every present value.
fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Greater,
        (None, Some(_)) => Ordering::Less,
        (None, None) => Ordering::Equal,
    }
}

fn choose(method: Method, cells: &[&CellSummary], margin: f64) -> Choice {
    let mut notices = Vec::new();
    if cells.len() == 1 {
        notices.push("no sweep: only one K value was evaluated".to_string());
    }
    let best_sil = cells
        .iter()
        .filter_map(|c| c.silhouette)
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.max(s)))
        });
    let candidates: Vec<&CellSummary> = match best_sil {
        Some(best) => cells
            .iter()
            .copied()
            .filter(|c| c.silhouette.is_some_and(|s| s >= best - margin))
            .collect(),
        None => {
            notices.push("no silhouette available; keyword ratio alone decides".to_string());
            cells.to_vec()
        }
    };
    // Highest keyword ratio; ties (and equal missing ratios) go to the smaller K.
    let winner = candidates
        .iter()
        .copied()
        .min_by(|a, b| cmp_opt(b.keyword_ratio, a.keyword_ratio).then(a.k.cmp(&b.k)))
        .expect("cells are non-empty");
    Choice {
        method,
        k: winner.k,
        silhouette: winner.silhouette,
        keyword_ratio: winner.keyword_ratio,
        candidates: candidates.iter().map(|c| c.k).collect(),
        notices,
    }
}

/// Two-stage model selection.
///
/// Per method, K values within `margin` of the best mean silhouette are
/// candidates, and the candidate with the highest mean keyword-match ratio
/// wins (ties go to the smaller K). The overall winner is the method choice
/// that is largest on (silhouette, keyword ratio), ties to the earlier method.
pub fn select_best(summaries: &[CellSummary], margin: f64) -> Result<Selection> {
    if summaries.is_empty() {
        return Err(Error::InvalidInput("no summaries to select from".into()));
    }
    let mut methods: Vec<Method> = summaries.iter().map(|s| s.method).collect();
    methods.sort();
    methods.dedup();
    let per_method: Vec<Choice> = methods
        .iter()
        .map(|&m| {
            let mut cells: Vec<&CellSummary> = summaries.iter().filter(|s| s.method == m).collect();
            cells.sort_by_key(|c| c.k);
            choose(m, &cells, margin)
        })
        .collect();
    let overall = per_method
        .iter()
        .reduce(|best, c| {
            let ord = cmp_opt(c.silhouette, best.silhouette)
                .then(cmp_opt(c.keyword_ratio, best.keyword_ratio));
            if ord == Ordering::Greater {
                c
            } else {
                best
            }
        })
        .expect("at least one method")
        .clone();
    Ok(Selection {
        margin,
        per_method,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(method: Method, k: usize, s: Option<f64>, r: Option<f64>) -> CellSummary {
        CellSummary {
            method,
            k,
            silhouette: s,
            keyword_ratio: r,
        }
    }

    #[test]
    fn keyword_ratio_breaks_near_ties() {
        let cells = [
            cell(Method::Lda, 2, Some(0.30), None),
            cell(Method::Lda, 3, Some(0.31), Some(0.55)),
            cell(Method::Lda, 4, Some(0.31), Some(0.73)),
        ];
        let sel = select_best(&cells, 0.02).unwrap();
        assert_eq!(sel.per_method[0].k, 4);
        assert_eq!(sel.per_method[0].candidates, vec![2, 3, 4]);
    }

    #[test]
    fn single_k_gets_notice() {
        let sel = select_best(&[cell(Method::Nmf, 3, Some(0.5), Some(0.5))], 0.02).unwrap();
        assert_eq!(sel.overall.k, 3);
        assert!(sel.overall.notices[0].contains("no sweep"));
    }

    #[test]
    fn all_equal_goes_to_smallest_k() {
        let cells: Vec<_> = (2..=5)
            .map(|k| cell(Method::Ntf, k, Some(0.4), Some(0.6)))
            .collect();
        assert_eq!(select_best(&cells, 0.02).unwrap().overall.k, 2);
    }

    #[test]
    fn margin_excludes_far_candidates() {
        let cells = [
            cell(Method::Lda, 2, Some(0.2), Some(1.0)),
            cell(Method::Lda, 3, Some(0.5), Some(0.1)),
        ];
        assert_eq!(select_best(&cells, 0.02).unwrap().overall.k, 3);
    }

    #[test]
    fn overall_is_lexicographic() {
        let cells = [
            cell(Method::Lda, 4, Some(0.5), Some(0.6)),
            cell(Method::Nmf, 4, Some(0.5), Some(0.7)),
            cell(Method::Ntf, 4, Some(0.4), Some(0.9)),
        ];
        let sel = select_best(&cells, 0.0).unwrap();
        assert_eq!(sel.overall.method, Method::Nmf);
        assert!(select_best(&[], 0.02).is_err());
    }
}
