//! Latent Dirichlet Allocation fitted by batch variational Bayes.
//!
//! Each iteration runs a per-document E-step over the variational Dirichlet
//! parameters `gamma` (warm-started from the previous iteration) followed by
//! a global M-step on the topic-word parameters `lambda`. Both steps are
//! exact coordinate-ascent updates, so the evidence lower bound recorded
//! after every iteration never decreases.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::par;
use crate::vectorize::{DocTermMatrix, Weighting};

/// Inner E-step budget per document.
const E_STEP_MAX_ITER: usize = 100;
/// Mean absolute change in a document's gamma that ends its E-step.
const E_STEP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic Dirichlet prior.
    pub alpha: f64,
    /// Topic-word Dirichlet prior.
    pub beta: f64,
    pub max_iter: usize,
    /// Relative ELBO change that counts as converged.
    pub tol: f64,
    pub seed: u64,
}

impl LdaConfig {
    /// Priors default to `1/k`.
    pub fn new(k: usize, seed: u64) -> Self {
        let prior = 1.0 / k.max(1) as f64;
        Self {
            k,
            alpha: prior,
            beta: prior,
            max_iter: 200,
            tol: 1e-6,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::RankOutOfRange {
                k: 0,
                max: usize::MAX,
            });
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite())
            || !(self.beta > 0.0 && self.beta.is_finite())
        {
            return Err(Error::InvalidInput(
                "alpha and beta must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// Row-normalized document-topic distributions (D × K).
    pub doc_topic: Array2<f64>,
    /// Row-normalized topic-term distributions (K × V).
    pub topic_term: Array2<f64>,
    /// Variational Dirichlet parameters per document (D × K).
    pub gamma: Array2<f64>,
    /// Variational Dirichlet parameters per topic (K × V).
    pub lambda: Array2<f64>,
    pub elbo_trace: Vec<f64>,
    pub config: LdaConfig,
    pub converged: bool,
    pub n_iter: usize,
}

/// `E[log X]` for each row of a matrix of Dirichlet parameters.
fn dirichlet_expectation(params: &Array2<f64>) -> Array2<f64> {
    let mut out = params.mapv(digamma);
    for (mut row, p) in out.axis_iter_mut(Axis(0)).zip(params.axis_iter(Axis(0))) {
        let total = digamma(p.sum());
        row.mapv_inplace(|v| v - total);
    }
    out
}

fn dirichlet_expectation_1d(params: &[f64]) -> Vec<f64> {
    let total = digamma(params.iter().sum());
    params.iter().map(|&p| digamma(p) - total).collect()
}

fn check_input(tf: &DocTermMatrix, k: usize) -> Result<()> {
    if tf.weighting() != Weighting::Tf || !tf.is_integral() {
        return Err(Error::InvalidInput(
            "LDA needs an integer term-frequency matrix".into(),
        ));
    }
    let (d, v) = tf.shape();
    if d == 0 || v == 0 {
        return Err(Error::EmptyCorpus);
    }
    if k > d {
        return Err(Error::RankOutOfRange { k, max: d });
    }
    if let Some(&row) = tf.empty_rows().first() {
        return Err(Error::InvalidInput(format!("document row {row} is empty")));
    }
    Ok(())
}

struct DocEStep {
    gamma: Vec<f64>,
    /// `(term, per-topic responsibility mass n_dw * phi_dwk / expElogbeta_kw)`
    /// for each stored term of the document.
    sstats: Vec<(usize, Vec<f64>)>,
}

/// Variational E-step for one document with `lambda` held fixed.
fn e_step_doc(
    cols: &[usize],
    counts: &[f64],
    gamma_init: &[f64],
    exp_elog_beta: &Array2<f64>,
    alpha: f64,
) -> DocEStep {
    let k = gamma_init.len();
    let mut gamma = gamma_init.to_vec();
    let mut exp_elog_theta: Vec<f64> = dirichlet_expectation_1d(&gamma)
        .iter()
        .map(|v| v.exp())
        .collect();
    let mut norm = vec![0.0; cols.len()];

    let compute_norm = |eth: &[f64], norm: &mut [f64]| {
        for (n, &w) in norm.iter_mut().zip(cols) {
            *n = (0..k).map(|t| eth[t] * exp_elog_beta[[t, w]]).sum::<f64>() + 1e-100;
        }
    };

    for _ in 0..E_STEP_MAX_ITER {
        compute_norm(&exp_elog_theta, &mut norm);
        let mut change = 0.0;
        for t in 0..k {
            let acc: f64 = cols
                .iter()
                .zip(counts)
                .zip(&norm)
                .map(|((&w, &c), &n)| c * exp_elog_beta[[t, w]] / n)
                .sum();
            let updated = alpha + exp_elog_theta[t] * acc;
            change += (updated - gamma[t]).abs();
            gamma[t] = updated;
        }
        exp_elog_theta = dirichlet_expectation_1d(&gamma)
            .iter()
            .map(|v| v.exp())
            .collect();
        if change / (k as f64) < E_STEP_TOL {
            break;
        }
    }
    // Responsibilities for the M-step use the final gamma.
    compute_norm(&exp_elog_theta, &mut norm);
    let sstats = cols
        .iter()
        .zip(counts)
        .zip(&norm)
        .map(|((&w, &c), &n)| (w, exp_elog_theta.iter().map(|&e| e * c / n).collect()))
        .collect();
    DocEStep { gamma, sstats }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Evidence lower bound of `tf` under variational parameters `gamma`, `lambda`,
/// with the word-level responsibilities at their optimum.
fn elbo(
    tf: &DocTermMatrix,
    gamma: &Array2<f64>,
    lambda: &Array2<f64>,
    alpha: f64,
    beta: f64,
) -> f64 {
    let (n_docs, n_terms) = tf.shape();
    let k = gamma.ncols();
    let elog_theta = dirichlet_expectation(gamma);
    let elog_beta = dirichlet_expectation(lambda);

    let doc_terms = par::map_range(n_docs, |d| {
        let (cols, counts) = tf.row(d);
        let likelihood: f64 = cols
            .iter()
            .zip(counts)
            .map(|(&w, &c)| c * log_sum_exp((0..k).map(|t| elog_theta[[d, t]] + elog_beta[[t, w]])))
            .sum();
        let g = gamma.row(d);
        let prior: f64 = (0..k)
            .map(|t| (alpha - g[t]) * elog_theta[[d, t]] + ln_gamma(g[t]) - ln_gamma(alpha))
            .sum::<f64>()
            + ln_gamma(alpha * k as f64)
            - ln_gamma(g.sum());
        likelihood + prior
    });
    let doc_total: f64 = doc_terms.iter().sum();

    let topic_total: f64 = (0..k)
        .map(|t| {
            let l = lambda.row(t);
            (0..n_terms)
                .map(|w| (beta - l[w]) * elog_beta[[t, w]] + ln_gamma(l[w]) - ln_gamma(beta))
                .sum::<f64>()
                + ln_gamma(beta * n_terms as f64)
                - ln_gamma(l.sum())
        })
        .sum();
    doc_total + topic_total
}

fn normalize_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// Fits LDA on a term-frequency matrix.
///
/// A run that hits `max_iter` before the relative ELBO change drops below
/// `tol` still returns a valid model with `converged == false`.
pub fn fit_lda(tf: &DocTermMatrix, config: &LdaConfig) -> Result<LdaModel> {
    config.validate()?;
    check_input(tf, config.k)?;
    let (n_docs, n_terms) = tf.shape();
    let k = config.k;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
    let mut lambda = Array2::from_shape_simple_fn((k, n_terms), || init.sample(&mut rng));

    // Uniform responsibilities: every topic gets an equal share of each document.
    let mut gamma = Array2::from_shape_fn((n_docs, k), |(d, _)| {
        config.alpha + tf.row_sum(d) / k as f64
    });

    let mut trace = Vec::new();
    let mut converged = false;
    let mut n_iter = 0;
    for _ in 0..config.max_iter {
        n_iter += 1;
        let exp_elog_beta = dirichlet_expectation(&lambda).mapv(f64::exp);
        let results = par::map_range(n_docs, |d| {
            let (cols, counts) = tf.row(d);
            e_step_doc(
                cols,
                counts,
                gamma.row(d).as_slice().expect("standard layout"),
                &exp_elog_beta,
                config.alpha,
            )
        });

        // Merge in document order so the reduction is schedule-independent.
        let mut sstats = Array2::<f64>::zeros((k, n_terms));
        for (d, res) in results.into_iter().enumerate() {
            gamma.row_mut(d).assign(&Array1::from(res.gamma));
            for (w, mass) in res.sstats {
                for (t, m) in mass.into_iter().enumerate() {
                    sstats[[t, w]] += m;
                }
            }
        }
        lambda = (&sstats * &exp_elog_beta).mapv(|v| v + config.beta);

        let bound = elbo(tf, &gamma, &lambda, config.alpha, config.beta);
        if !bound.is_finite() {
            return Err(Error::NonFinite("LDA evidence lower bound".into()));
        }
        let previous = trace.last().copied();
        trace.push(bound);
        if let Some(prev) = previous {
            if ((bound - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < config.tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::warn!(
            "LDA (k={k}) did not converge within {} iterations",
            config.max_iter
        );
    }

    Ok(LdaModel {
        doc_topic: normalize_rows(&gamma),
        topic_term: normalize_rows(&lambda),
        gamma,
        lambda,
        elbo_trace: trace,
        config: config.clone(),
        converged,
        n_iter,
    })
}

/// Fits `restarts` models from consecutive seeds (`seed`, `seed + 1`, ...)
/// and keeps the one with the highest final ELBO; earlier seeds win ties.
///
/// Batch variational inference only finds a local optimum of the bound, so
/// a few restarts guard against runs that merge two topics.
pub fn fit_lda_restarts(
    tf: &DocTermMatrix,
    config: &LdaConfig,
    restarts: usize,
) -> Result<LdaModel> {
    let mut best: Option<LdaModel> = None;
    for r in 0..restarts.max(1) {
        let cfg = LdaConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let model = fit_lda(tf, &cfg)?;
        let score = *model.elbo_trace.last().expect("trace is never empty");
        if best
            .as_ref()
            .is_none_or(|b| score > *b.elbo_trace.last().expect("trace is never empty"))
        {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Recomputes the evidence lower bound of a fitted model on `tf`.
pub fn lda_elbo(model: &LdaModel, tf: &DocTermMatrix) -> Result<f64> {
    let (d, v) = tf.shape();
    if model.gamma.dim() != (d, model.config.k) || model.lambda.dim() != (model.config.k, v) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} corpus", model.gamma.nrows(), model.lambda.ncols()),
            found: format!("{d}x{v}"),
        });
    }
    Ok(elbo(
        tf,
        &model.gamma,
        &model.lambda,
        model.config.alpha,
        model.config.beta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf_from(rows: &[&[(usize, u32)]], v: usize) -> DocTermMatrix {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&(c, n)| (c, n as f64)).collect())
            .collect();
        DocTermMatrix::from_rows(v, rows, Weighting::Tf).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        let tf = tf_from(&[&[(0, 2)], &[(1, 1)]], 2);
        assert!(matches!(
            fit_lda(&tf, &LdaConfig::new(3, 0)),
            Err(Error::RankOutOfRange { k: 3, max: 2 })
        ));
        let with_empty = tf_from(&[&[(0, 2)], &[]], 2);
        assert!(fit_lda(&with_empty, &LdaConfig::new(1, 0)).is_err());
        let weighted =
            DocTermMatrix::from_rows(2, vec![vec![(0, 0.5)], vec![(1, 1.0)]], Weighting::Tf)
                .unwrap();
        assert!(fit_lda(&weighted, &LdaConfig::new(1, 0)).is_err());
    }

    #[test]
    fn default_priors_are_one_over_k() {
        let c = LdaConfig::new(4, 1);
        assert_eq!(c.alpha, 0.25);
        assert_eq!(c.beta, 0.25);
        assert_eq!(c.max_iter, 200);
        assert_eq!(c.tol, 1e-6);
    }

    #[test]
    fn single_topic_is_degenerate() {
        let tf = tf_from(&[&[(0, 3), (2, 1)], &[(1, 2), (2, 2)], &[(0, 1)]], 3);
        let model = fit_lda(&tf, &LdaConfig::new(1, 7)).unwrap();
        assert!(model.doc_topic.iter().all(|&p| p == 1.0));
        // Posterior mean of the single topic: (beta + n_w) / (V*beta + N).
        let counts = [4.0, 2.0, 3.0];
        let n: f64 = counts.iter().sum();
        for (w, c) in counts.iter().enumerate() {
            let expected = (1.0 + c) / (3.0 + n);
            assert!((model.topic_term[[0, w]] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_matches_recomputation() {
        let tf = tf_from(
            &[
                &[(0, 3), (1, 1)],
                &[(2, 2), (3, 2)],
                &[(0, 1), (1, 4)],
                &[(3, 5)],
            ],
            4,
        );
        let model = fit_lda(&tf, &LdaConfig::new(2, 3)).unwrap();
        let again = lda_elbo(&model, &tf).unwrap();
        assert!((again - model.elbo_trace.last().unwrap()).abs() <= 1e-9 * again.abs());
    }

    #[test]
    fn elbo_dimension_mismatch() {
        let tf = tf_from(&[&[(0, 3)], &[(1, 1)]], 2);
        let model = fit_lda(&tf, &LdaConfig::new(1, 0)).unwrap();
        let other = tf_from(&[&[(0, 3)], &[(1, 1)]], 3);
        assert!(matches!(
            lda_elbo(&model, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unconverged_model_is_flagged_but_valid() {
        let tf = tf_from(
            &[&[(0, 3), (1, 1)], &[(2, 2), (3, 2)], &[(0, 1), (1, 4)]],
            4,
        );
        let mut cfg = LdaConfig::new(2, 3);
        cfg.max_iter = 1;
        let model = fit_lda(&tf, &cfg).unwrap();
        assert!(!model.converged);
        assert_eq!(model.n_iter, 1);
        for row in model.doc_topic.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
}
