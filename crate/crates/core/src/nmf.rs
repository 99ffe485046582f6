//! Nonnegative matrix factorization `X ≈ doc_topic · topic_term` with NNDSVD
//! initialization and Lee–Seung multiplicative updates on the Frobenius
//! objective `½‖X − WH‖²`.
//!
//! The updates are often quoted without transposes (`W ← W·XH / WHH`,
//! `H ← H·WX / WWH`), which does not type-check for a document×term `X`.
//! The dimensionally consistent form is used here:
//!
//! ```text
//! W ← W ∘ (X Hᵀ) / (W H Hᵀ + ε)
//! H ← H ∘ (Wᵀ X) / (Wᵀ W H + ε)
//! ```

use nalgebra::DMatrix;
use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::DocTermMatrix;

/// Added to update denominators.
pub const UPDATE_EPS: f64 = 1e-12;
/// Floor applied to NNDSVD entries so multiplicative updates can move them.
pub const INIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    /// Recorded for provenance; NNDSVD initialization is deterministic.
    pub seed: u64,
}

impl NmfConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 300,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    /// D × K document loadings.
    pub doc_topic: Array2<f64>,
    /// K × V topic loadings.
    pub topic_term: Array2<f64>,
    /// Objective at initialization followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub k: usize,
    pub seed: u64,
    pub converged: bool,
    pub n_iter: usize,
}

impl NmfModel {
    /// Rescales every topic_term row to unit L2 norm, moving the scale into
    /// the matching doc_topic column. The product is unchanged.
    pub fn normalize_topics(&mut self) {
        for (t, mut row) in self.topic_term.axis_iter_mut(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
                self.doc_topic.column_mut(t).mapv_inplace(|v| v * norm);
            }
        }
    }

    pub fn reconstruction(&self) -> Array2<f64> {
        self.doc_topic.dot(&self.topic_term)
    }
}

fn check_rank(k: usize, shape: (usize, usize)) -> Result<()> {
    let max = shape.0.min(shape.1);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    Ok(())
}

/// `½‖X − W·H‖²_F`.
pub fn nmf_objective(
    x: &Array2<f64>,
    doc_topic: &Array2<f64>,
    topic_term: &Array2<f64>,
) -> Result<f64> {
    if doc_topic.nrows() != x.nrows()
        || topic_term.ncols() != x.ncols()
        || doc_topic.ncols() != topic_term.nrows()
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?} ≈ (D×K)(K×V)", x.dim()),
            found: format!("{:?} × {:?}", doc_topic.dim(), topic_term.dim()),
        });
    }
    let product = doc_topic.dot(topic_term);
    let sq: f64 = Zip::from(x)
        .and(&product)
        .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
    Ok(0.5 * sq)
}

fn to_nalgebra(x: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

fn split_signs(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        v.iter().map(|&a| a.max(0.0)).collect(),
        v.iter().map(|&a| (-a).max(0.0)).collect(),
    )
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Nonnegative double SVD initialization.
///
/// The leading singular triplet gives the first component from absolute
/// values; each further triplet keeps whichever of its positive or negative
/// parts carries more mass. Singular values below the numerical rank cutoff
/// are treated as zero, and every entry is floored at [`INIT_FLOOR`].
pub fn nndsvd_init(x: &Array2<f64>, k: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    check_rank(k, x.dim())?;
    if x.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "NNDSVD needs a finite nonnegative matrix".into(),
        ));
    }
    let (n_rows, n_cols) = x.dim();
    let svd = to_nalgebra(x)
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Svd("did not converge".into()))?;
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Svd("missing left vectors".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Svd("missing right vectors".into()))?;
    let sigma = &svd.singular_values;
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::Svd("non-finite singular values".into()));
    }

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let cutoff = sigma[order[0]] * (n_rows.max(n_cols) as f64) * f64::EPSILON;

    let mut w = Array2::<f64>::zeros((n_rows, k));
    let mut h = Array2::<f64>::zeros((k, n_cols));
    for (j, &idx) in order.iter().take(k).enumerate() {
        let s = sigma[idx];
        if s <= cutoff {
            continue;
        }
        let left: Vec<f64> = u.column(idx).iter().copied().collect();
        let right: Vec<f64> = v_t.row(idx).iter().copied().collect();
        let (scale, a, b) = if j == 0 {
            let a: Vec<f64> = left.iter().map(|v| v.abs()).collect();
            let b: Vec<f64> = right.iter().map(|v| v.abs()).collect();
            (s.sqrt(), a, b)
        } else {
            let (lp, ln) = split_signs(&left);
            let (rp, rn) = split_signs(&right);
            let (lpn, lnn, rpn, rnn) = (l2(&lp), l2(&ln), l2(&rp), l2(&rn));
            let (mass_pos, mass_neg) = (lpn * rpn, lnn * rnn);
            let (a, b, an, bn, mass) = if mass_pos > mass_neg {
                (lp, rp, lpn, rpn, mass_pos)
            } else {
                (ln, rn, lnn, rnn, mass_neg)
            };
            if mass == 0.0 {
                continue;
            }
            let a = a.iter().map(|v| v / an).collect();
            let b = b.iter().map(|v| v / bn).collect();
            ((s * mass).sqrt(), a, b)
        };
        for i in 0..n_rows {
            w[[i, j]] = scale * a[i];
        }
        for t in 0..n_cols {
            h[[j, t]] = scale * b[t];
        }
    }
    w.mapv_inplace(|v| v.max(INIT_FLOOR));
    h.mapv_inplace(|v| v.max(INIT_FLOOR));
    Ok((w, h))
}

fn all_finite(m: &Array2<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// One multiplicative step on `doc_topic`, then one on `topic_term`.
pub fn multiplicative_step(x: &Array2<f64>, w: &mut Array2<f64>, h: &mut Array2<f64>) {
    let numer = x.dot(&h.t());
    let denom = w.dot(&h.dot(&h.t()));
    Zip::from(&mut *w)
        .and(&numer)
        .and(&denom)
        .for_each(|v, &n, &d| *v *= n / (d + UPDATE_EPS));

    let numer = w.t().dot(x);
    let denom = w.t().dot(&*w).dot(&*h);
    Zip::from(&mut *h)
        .and(&numer)
        .and(&denom)
        .for_each(|v, &n, &d| *v *= n / (d + UPDATE_EPS));
}

/// Fits NMF on a (TF-IDF) document-term matrix, starting from NNDSVD.
pub fn fit_nmf(x: &DocTermMatrix, config: &NmfConfig) -> Result<NmfModel> {
    let dense = x.to_dense();
    check_rank(config.k, dense.dim())?;
    let (w, h) = nndsvd_init(&dense, config.k)?;
    fit_nmf_from(&dense, w, h, config)
}

/// Runs multiplicative updates from the given factors.
pub fn fit_nmf_from(
    x: &Array2<f64>,
    mut doc_topic: Array2<f64>,
    mut topic_term: Array2<f64>,
    config: &NmfConfig,
) -> Result<NmfModel> {
    check_rank(config.k, x.dim())?;
    if doc_topic.dim() != (x.nrows(), config.k) || topic_term.dim() != (config.k, x.ncols()) {
        return Err(Error::DimensionMismatch {
            expected: format!(
                "({}, {}) and ({}, {})",
                x.nrows(),
                config.k,
                config.k,
                x.ncols()
            ),
            found: format!("{:?} and {:?}", doc_topic.dim(), topic_term.dim()),
        });
    }
    if doc_topic.iter().chain(topic_term.iter()).any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "initial factors must be nonnegative".into(),
        ));
    }
    let mut trace = vec![nmf_objective(x, &doc_topic, &topic_term)?];
    let mut converged = false;
    let mut n_iter = 0;
    for _ in 0..config.max_iter {
        n_iter += 1;
        multiplicative_step(x, &mut doc_topic, &mut topic_term);
        if !all_finite(&doc_topic) || !all_finite(&topic_term) {
            return Err(Error::NonFinite(format!(
                "NMF factors at iteration {n_iter}"
            )));
        }
        debug_assert!(doc_topic.iter().chain(topic_term.iter()).all(|&v| v >= 0.0));
        let obj = nmf_objective(x, &doc_topic, &topic_term)?;
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        let rel = if prev > 0.0 {
            (prev - obj).abs() / prev
        } else {
            0.0
        };
        if rel < config.tol {
            converged = true;
            break;
        }
    }
    Ok(NmfModel {
        doc_topic,
        topic_term,
        objective_trace: trace,
        k: config.k,
        seed: config.seed,
        converged,
        n_iter,
    })
}
