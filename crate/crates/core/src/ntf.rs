//! Nonnegative CP (PARAFAC) factorization of the document×company×term
//! tensor:
//!
//! ```text
//! min ‖X − Σ_r doc[:, r] ∘ company[:, r] ∘ term[:, r]‖²   s.t. all factors ≥ 0
//! ```
//!
//! Solved with hierarchical alternating least squares (HALS): each mode is
//! updated column by column with the exact nonnegative minimizer while the
//! other two modes are fixed. The sparse MTTKRP makes every sweep cost
//! O(nnz · K + (D + C + V) · K²); the dense D·C·V tensor is never formed.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::vectorize::DocCompanyTermTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtfConfig {
    pub k: usize,
    pub max_sweeps: usize,
    /// Relative error change that counts as converged.
    pub tol: f64,
    pub seed: u64,
}

impl NtfConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_sweeps: 200,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtfModel {
    /// D × K
    pub doc_factor: Array2<f64>,
    /// C × K
    pub company_factor: Array2<f64>,
    /// V × K
    pub term_factor: Array2<f64>,
    /// Squared reconstruction error at initialization, then after each sweep.
    pub error_trace: Vec<f64>,
    pub k: usize,
    pub seed: u64,
    pub converged: bool,
    pub n_sweeps: usize,
    /// Components that were reseeded after collapsing to zero.
    pub rescued_components: Vec<usize>,
}

/// Update kernel for one factor matrix given the MTTKRP and the Hadamard
/// product of the other two Gram matrices. Alternative solvers plug in here.
pub trait ModeUpdate: Sync {
    fn update(&self, factor: &mut Array2<f64>, mttkrp: &Array2<f64>, gram: &Array2<f64>);
}

/// Column-wise HALS: `a_r ← max(0, a_r + (M_r − A G_r) / G_rr)`.
///
/// Rows are independent, so each row runs the full column sweep on its own;
/// the result equals the column-by-column order exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hals;

impl ModeUpdate for Hals {
    fn update(&self, factor: &mut Array2<f64>, mttkrp: &Array2<f64>, gram: &Array2<f64>) {
        let k = factor.ncols();
        let slice = factor
            .as_slice_mut()
            .expect("factor matrices are in standard layout");
        par::for_each_row_mut(slice, k, |i, row| {
            for r in 0..k {
                let g_rr = gram[[r, r]];
                if g_rr <= 0.0 {
                    continue;
                }
                let fitted: f64 = (0..k).map(|s| row[s] * gram[[s, r]]).sum();
                row[r] = (row[r] + (mttkrp[[i, r]] - fitted) / g_rr).max(0.0);
            }
        });
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Mode {
    Doc,
    Company,
    Term,
}

/// Tensor entries grouped by one mode's index, for row-parallel MTTKRP.
struct ModeIndex {
    /// Offsets into `order` per row of the mode.
    offsets: Vec<usize>,
    /// Entry indices sorted by (mode row, original position).
    order: Vec<usize>,
}

impl ModeIndex {
    fn build(x: &DocCompanyTermTensor, mode: Mode, n_rows: usize) -> Self {
        let key = |i: usize| {
            let e = &x.entries()[i];
            match mode {
                Mode::Doc => e.doc,
                Mode::Company => e.company,
                Mode::Term => e.term,
            }
        };
        let mut order: Vec<usize> = (0..x.nnz()).collect();
        order.sort_by_key(|&i| (key(i), i));
        let mut offsets = vec![0usize; n_rows + 1];
        for &i in &order {
            offsets[key(i) + 1] += 1;
        }
        for r in 0..n_rows {
            offsets[r + 1] += offsets[r];
        }
        Self { offsets, order }
    }
}

struct Factors {
    doc: Array2<f64>,
    company: Array2<f64>,
    term: Array2<f64>,
}

impl Factors {
    fn get(&self, mode: Mode) -> &Array2<f64> {
        match mode {
            Mode::Doc => &self.doc,
            Mode::Company => &self.company,
            Mode::Term => &self.term,
        }
    }

    fn get_mut(&mut self, mode: Mode) -> &mut Array2<f64> {
        match mode {
            Mode::Doc => &mut self.doc,
            Mode::Company => &mut self.company,
            Mode::Term => &mut self.term,
        }
    }

    fn others(mode: Mode) -> (Mode, Mode) {
        match mode {
            Mode::Doc => (Mode::Company, Mode::Term),
            Mode::Company => (Mode::Doc, Mode::Term),
            Mode::Term => (Mode::Doc, Mode::Company),
        }
    }
}

fn gram(m: &Array2<f64>) -> Array2<f64> {
    m.t().dot(m)
}

/// Sparse matricized-tensor times Khatri–Rao product for `mode`.
fn mttkrp(
    x: &DocCompanyTermTensor,
    index: &ModeIndex,
    factors: &Factors,
    mode: Mode,
) -> Array2<f64> {
    let k = factors.doc.ncols();
    let n_rows = index.offsets.len() - 1;
    let (m1, m2) = Factors::others(mode);
    let (f1, f2) = (factors.get(m1), factors.get(m2));
    let pick = |e: &crate::vectorize::TensorEntry, m: Mode| match m {
        Mode::Doc => e.doc,
        Mode::Company => e.company,
        Mode::Term => e.term,
    };
    let rows = par::map_range(n_rows, |row| {
        let mut acc = vec![0.0; k];
        for &i in &index.order[index.offsets[row]..index.offsets[row + 1]] {
            let e = &x.entries()[i];
            let (a, b) = (pick(e, m1), pick(e, m2));
            for r in 0..k {
                acc[r] += e.value * f1[[a, r]] * f2[[b, r]];
            }
        }
        acc
    });
    Array2::from_shape_vec((n_rows, k), rows.concat()).expect("mttkrp shape")
}

/// `⟨X, model⟩` summed over stored entries.
fn inner_with_model(x: &DocCompanyTermTensor, factors: &Factors) -> f64 {
    let k = factors.doc.ncols();
    x.entries()
        .iter()
        .map(|e| {
            e.value
                * (0..k)
                    .map(|r| {
                        factors.doc[[e.doc, r]]
                            * factors.company[[e.company, r]]
                            * factors.term[[e.term, r]]
                    })
                    .sum::<f64>()
        })
        .sum()
}

fn model_norm_sq(factors: &Factors) -> f64 {
    let g = gram(&factors.doc) * gram(&factors.company) * gram(&factors.term);
    g.sum()
}

fn error_sq(x: &DocCompanyTermTensor, x_norm_sq: f64, factors: &Factors) -> f64 {
    (x_norm_sq - 2.0 * inner_with_model(x, factors) + model_norm_sq(factors)).max(0.0)
}

fn check_dims(x: &DocCompanyTermTensor, model: &NtfModel) -> Result<()> {
    let (d, c, v) = x.shape();
    let k = model.doc_factor.ncols();
    if model.doc_factor.nrows() != d
        || model.company_factor.dim() != (c, k)
        || model.term_factor.dim() != (v, k)
    {
        return Err(Error::DimensionMismatch {
            expected: format!("factors for a {d}x{c}x{v} tensor"),
            found: format!(
                "{:?}, {:?}, {:?}",
                model.doc_factor.dim(),
                model.company_factor.dim(),
                model.term_factor.dim()
            ),
        });
    }
    Ok(())
}

/// Squared Frobenius norm of `X` minus the CP model.
pub fn cp_reconstruction_error(x: &DocCompanyTermTensor, model: &NtfModel) -> Result<f64> {
    check_dims(x, model)?;
    let factors = Factors {
        doc: model.doc_factor.clone(),
        company: model.company_factor.clone(),
        term: model.term_factor.clone(),
    };
    Ok(error_sq(x, x.frobenius_sq(), &factors))
}

fn random_factor(rng: &mut ChaCha8Rng, rows: usize, k: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_simple_fn((rows, k), || {
        let z: f64 = StandardNormal.sample(rng);
        z.abs()
    });
    for mut col in m.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|v| v / norm);
        }
    }
    m
}

/// Reseeds a dead component from the residual fiber through the entry with
/// the largest positive residual. Never increases the error: the new
/// component is the clipped residual along one fiber.
fn rescue_component(x: &DocCompanyTermTensor, factors: &mut Factors, r: usize) -> bool {
    let k = factors.doc.ncols();
    let model_at = |f: &Factors, d: usize, c: usize, t: usize| {
        (0..k)
            .map(|s| f.doc[[d, s]] * f.company[[c, s]] * f.term[[t, s]])
            .sum::<f64>()
    };
    let best = x
        .entries()
        .iter()
        .map(|e| (e, e.value - model_at(factors, e.doc, e.company, e.term)))
        .filter(|(_, res)| *res > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let Some((pivot, _)) = best else {
        return false;
    };
    let (c, t) = (pivot.company, pivot.term);
    let mut fiber = vec![0.0; factors.doc.nrows()];
    for e in x.entries().iter().filter(|e| e.company == c && e.term == t) {
        fiber[e.doc] = (e.value - model_at(factors, e.doc, c, t)).max(0.0);
    }
    factors
        .doc
        .column_mut(r)
        .assign(&ndarray::Array1::from(fiber));
    factors.company.column_mut(r).fill(0.0);
    factors.company[[c, r]] = 1.0;
    factors.term.column_mut(r).fill(0.0);
    factors.term[[t, r]] = 1.0;
    true
}

/// Fits a rank-`k` nonnegative CP model with the default HALS kernel.
pub fn fit_ntf(x: &DocCompanyTermTensor, config: &NtfConfig) -> Result<NtfModel> {
    fit_ntf_with(x, config, &Hals)
}

/// Fits `restarts` models from consecutive seeds (`seed`, `seed + 1`, ...)
/// and keeps the one with the lowest final error; earlier seeds win ties.
pub fn fit_ntf_restarts(
    x: &DocCompanyTermTensor,
    config: &NtfConfig,
    restarts: usize,
) -> Result<NtfModel> {
    let mut best: Option<NtfModel> = None;
    for r in 0..restarts.max(1) {
        let cfg = NtfConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let model = fit_ntf(x, &cfg)?;
        let err = *model.error_trace.last().expect("trace is never empty");
        if best
            .as_ref()
            .is_none_or(|b| err < *b.error_trace.last().expect("trace is never empty"))
        {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Fits with a caller-supplied mode update kernel.
pub fn fit_ntf_with<U: ModeUpdate>(
    x: &DocCompanyTermTensor,
    config: &NtfConfig,
    kernel: &U,
) -> Result<NtfModel> {
    let (n_docs, n_companies, n_terms) = x.shape();
    if n_docs == 0 || n_companies == 0 || n_terms == 0 {
        return Err(Error::EmptyCorpus);
    }
    let max = n_docs.min(n_companies).min(n_terms);
    if config.k == 0 || config.k > max {
        return Err(Error::RankOutOfRange { k: config.k, max });
    }
    let k = config.k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let doc = random_factor(&mut rng, n_docs, k);
    let company = random_factor(&mut rng, n_companies, k);
    let term = random_factor(&mut rng, n_terms, k);
    fit_ntf_from(x, doc, company, term, config, kernel)
}

/// Fits starting from the given factors instead of a seeded random start.
pub fn fit_ntf_from<U: ModeUpdate>(
    x: &DocCompanyTermTensor,
    doc: Array2<f64>,
    company: Array2<f64>,
    term: Array2<f64>,
    config: &NtfConfig,
    kernel: &U,
) -> Result<NtfModel> {
    let (n_docs, n_companies, n_terms) = x.shape();
    let k = doc.ncols();
    if doc.dim() != (n_docs, k) || company.dim() != (n_companies, k) || term.dim() != (n_terms, k) {
        return Err(Error::DimensionMismatch {
            expected: format!(
                "initial factors for a {n_docs}x{n_companies}x{n_terms} tensor with rank {k}"
            ),
            found: format!("{:?}, {:?}, {:?}", doc.dim(), company.dim(), term.dim()),
        });
    }
    if [&doc, &company, &term]
        .iter()
        .any(|f| f.iter().any(|&v| !v.is_finite() || v < 0.0))
    {
        return Err(Error::InvalidInput(
            "initial factors must be finite and nonnegative".into(),
        ));
    }
    let mut factors = Factors {
        doc: doc.as_standard_layout().to_owned(),
        company: company.as_standard_layout().to_owned(),
        term: term.as_standard_layout().to_owned(),
    };
    let indexes = [
        (Mode::Doc, ModeIndex::build(x, Mode::Doc, n_docs)),
        (
            Mode::Company,
            ModeIndex::build(x, Mode::Company, n_companies),
        ),
        (Mode::Term, ModeIndex::build(x, Mode::Term, n_terms)),
    ];

    let x_norm_sq = x.frobenius_sq();
    let mut trace = vec![error_sq(x, x_norm_sq, &factors)];
    let mut rescued = vec![false; k];
    let mut converged = false;
    let mut n_sweeps = 0;

    for _ in 0..config.max_sweeps {
        n_sweeps += 1;
        for (mode, index) in &indexes {
            let m = mttkrp(x, index, &factors, *mode);
            let (o1, o2) = Factors::others(*mode);
            let g = gram(factors.get(o1)) * gram(factors.get(o2));
            kernel.update(factors.get_mut(*mode), &m, &g);

            let factor = factors.get(*mode);
            let dead: Vec<usize> = (0..k)
                .filter(|&r| {
                    !rescued[r] && x_norm_sq > 0.0 && factor.column(r).iter().all(|&v| v == 0.0)
                })
                .collect();
            for r in dead {
                rescued[r] = true;
                {
                    if rescue_component(x, &mut factors, r) {
                        log::debug!("NTF component {r} collapsed; reseeded from residual");
                    }
                }
            }
        }
        let all = [&factors.doc, &factors.company, &factors.term];
        if all.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("NTF factors at sweep {n_sweeps}")));
        }
        let err = error_sq(x, x_norm_sq, &factors);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(err);
        let rel = if prev > 0.0 {
            (prev - err).abs() / prev
        } else {
            0.0
        };
        if rel < config.tol {
            converged = true;
            break;
        }
    }

    Ok(NtfModel {
        doc_factor: factors.doc,
        company_factor: factors.company,
        term_factor: factors.term,
        error_trace: trace,
        k,
        seed: config.seed,
        converged,
        n_sweeps,
        rescued_components: rescued
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| i)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorize::TensorEntry;

    fn tensor(
        shape: (usize, usize, usize),
        doc_company: Vec<usize>,
        cells: &[(usize, usize, f64)],
    ) -> DocCompanyTermTensor {
        let entries = cells
            .iter()
            .map(|&(d, t, v)| TensorEntry {
                doc: d,
                company: doc_company[d],
                term: t,
                value: v,
            })
            .collect();
        DocCompanyTermTensor::from_entries(shape, doc_company, entries).unwrap()
    }

    #[test]
    fn rank_bounds() {
        let x = tensor((2, 1, 3), vec![0, 0], &[(0, 0, 1.0), (1, 2, 2.0)]);
        assert!(matches!(
            fit_ntf(&x, &NtfConfig::new(2, 0)),
            Err(Error::RankOutOfRange { k: 2, max: 1 })
        ));
        assert!(matches!(
            fit_ntf(&x, &NtfConfig::new(0, 0)),
            Err(Error::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_tensor_is_rejected() {
        let x = DocCompanyTermTensor::from_entries((0, 0, 0), vec![], vec![]).unwrap();
        assert!(matches!(
            fit_ntf(&x, &NtfConfig::new(1, 0)),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn zero_tensor_fits_to_zero() {
        let x = tensor((3, 2, 4), vec![0, 1, 1], &[]);
        let model = fit_ntf(&x, &NtfConfig::new(2, 5)).unwrap();
        assert_eq!(*model.error_trace.last().unwrap(), 0.0);
        assert_eq!(cp_reconstruction_error(&x, &model).unwrap(), 0.0);
    }

    #[test]
    fn zero_factors_give_tensor_norm() {
        let x = tensor((2, 2, 2), vec![0, 1], &[(0, 0, 3.0), (1, 1, 4.0)]);
        let model = NtfModel {
            doc_factor: Array2::zeros((2, 1)),
            company_factor: Array2::zeros((2, 1)),
            term_factor: Array2::zeros((2, 1)),
            error_trace: vec![],
            k: 1,
            seed: 0,
            converged: false,
            n_sweeps: 0,
            rescued_components: vec![],
        };
        assert_eq!(cp_reconstruction_error(&x, &model).unwrap(), 25.0);
    }

    #[test]
    fn error_dimension_mismatch() {
        let x = tensor((2, 2, 2), vec![0, 1], &[(0, 0, 3.0)]);
        let model = NtfModel {
            doc_factor: Array2::zeros((3, 1)),
            company_factor: Array2::zeros((2, 1)),
            term_factor: Array2::zeros((2, 1)),
            error_trace: vec![],
            k: 1,
            seed: 0,
            converged: false,
            n_sweeps: 0,
            rescued_components: vec![],
        };
        assert!(matches!(
            cp_reconstruction_error(&x, &model),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let x = tensor(
            (4, 2, 5),
            vec![0, 0, 1, 1],
            &[
                (0, 0, 2.0),
                (0, 1, 1.0),
                (1, 0, 3.0),
                (2, 3, 1.0),
                (2, 4, 2.0),
                (3, 4, 5.0),
            ],
        );
        let a = fit_ntf(&x, &NtfConfig::new(2, 11)).unwrap();
        let b = fit_ntf(&x, &NtfConfig::new(2, 11)).unwrap();
        assert_eq!(a.doc_factor, b.doc_factor);
        assert_eq!(a.term_factor, b.term_factor);
        assert_eq!(a.error_trace, b.error_trace);
    }
}
