//! End-to-end experiment: load and preprocess a corpus, sweep K for every
//! requested method, evaluate each fit, select the best K, and write the
//! result tree.
//!
//! ```text
//! out/<method>/k<k>/{doc_topic.csv, topic_term.csv, [company_topic.csv],
//!                    silhouette.csv, keywords.csv, report.json, model.json}
//! out/summary/{silhouette_by_k.csv, keyword_match_by_k.csv,
//!              decisiveness_by_method.csv, selection.csv, manifest.json}
//! ```
//!
//! (method, K) cells run concurrently and independently: a failing cell is
//! recorded in the manifest and never stops the others.

mod config;
pub mod output;
mod select;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use config::{
    Filters, LdaSettings, Method, NmfSettings, NtfSettings, RunConfig, SilhouetteRows,
};
pub use select::{select_best, CellSummary, Choice, Selection};

use crate::corpus::{
    company_map, load_corpus, preprocess_corpus, RawDocument, StopwordList, TokenizedDocument,
};
use crate::error::{Error, Result};
use crate::evaluate::{
    argmax_assign, crosstab, decisiveness, group_frequent_terms, keyword_match, silhouette,
    top_keywords, AssignmentSummary, EvaluationReport, Metric, SilhouetteResult,
};
use crate::lda::{fit_lda_restarts, LdaConfig};
use crate::nmf::{fit_nmf, NmfConfig};
use crate::ntf::{fit_ntf_restarts, NtfConfig};
use crate::par;
use crate::vectorize::{
    build_tensor, build_vocabulary, tf_matrix, tfidf_from_tf, write_sparse, DocCompanyTermTensor,
    DocTermMatrix, Vocabulary,
};
use output::{entity_topic_csv, opt, topic_term_csv, write_atomic, write_json, CsvTable};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Why a run could not produce results at all; maps onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[source] Error),
    #[error("corpus error: {0}")]
    Corpus(#[source] Error),
    #[error("output error: {0}")]
    Output(#[source] Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output(_) => 1,
            RunError::Corpus(_) => 2,
        }
    }
}

/// Exit code for a run that produced a manifest: 0, or 3 when any cell failed.
pub fn manifest_exit_code(manifest: &RunManifest) -> i32 {
    if manifest.failed_cells == 0 {
        0
    } else {
        3
    }
}

/// Vectorized corpus shared by every cell of a run.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub doc_ids: Vec<String>,
    pub vocab: Vocabulary,
    pub tf: DocTermMatrix,
    pub tfidf: DocTermMatrix,
    pub tensor: DocCompanyTermTensor,
    pub digest: CorpusDigest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDigest {
    pub documents_loaded: usize,
    pub documents_after_filters: usize,
    /// Documents that entered the matrices.
    pub documents: usize,
    pub companies: usize,
    pub vocabulary: usize,
    pub tf_nnz: usize,
    pub tensor_nnz: usize,
    /// Documents left without tokens after preprocessing.
    pub empty_after_preprocessing: Vec<String>,
    /// Documents whose tokens all fell below `min_df`.
    pub empty_after_min_df: Vec<String>,
}

/// Filters, preprocesses and vectorizes loaded documents.
pub fn prepare(raw: &[RawDocument], config: &RunConfig) -> Result<PreparedCorpus> {
    let kept: Vec<RawDocument> = raw
        .iter()
        .filter(|d| config.filters.accepts(d))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let stops = StopwordList::english_with_extras(&config.extra_stopwords);
    let pre = preprocess_corpus(&kept, &stops);
    if pre.documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = build_vocabulary(&pre.documents, config.min_df)?;
    let (docs, below_min_df): (Vec<TokenizedDocument>, Vec<TokenizedDocument>) = pre
        .documents
        .into_iter()
        .partition(|d| d.tokens.iter().any(|t| vocab.index_of(t).is_some()));
    for d in &below_min_df {
        log::warn!(
            "document \"{}\" has no term with df >= {}; dropped",
            d.doc_id,
            config.min_df
        );
    }
    let tf = tf_matrix(&docs, &vocab);
    let tfidf = tfidf_from_tf(&tf);
    let tensor = build_tensor(&docs, &vocab, &company_map(&kept))?;
    let digest = CorpusDigest {
        documents_loaded: raw.len(),
        documents_after_filters: kept.len(),
        documents: docs.len(),
        companies: tensor.shape().1,
        vocabulary: vocab.len(),
        tf_nnz: tf.nnz(),
        tensor_nnz: tensor.nnz(),
        empty_after_preprocessing: pre.empty_doc_ids,
        empty_after_min_df: below_min_df.into_iter().map(|d| d.doc_id).collect(),
    };
    Ok(PreparedCorpus {
        doc_ids: docs.into_iter().map(|d| d.doc_id).collect(),
        vocab,
        tf,
        tfidf,
        tensor,
        digest,
    })
}

/// Common output of the three engines.
#[derive(Debug, Clone)]
pub struct TopicModelResult {
    pub method: Method,
    pub k: usize,
    /// D × K
    pub doc_topic: Array2<f64>,
    /// K × V
    pub topic_term: Array2<f64>,
    /// C × K, tensor method only.
    pub company_topic: Option<Array2<f64>>,
    /// Solver configuration and convergence trace.
    pub sidecar: serde_json::Value,
}

pub fn fit_method(
    method: Method,
    k: usize,
    corpus: &PreparedCorpus,
    config: &RunConfig,
) -> Result<TopicModelResult> {
    match method {
        Method::Lda => {
            let mut cfg = LdaConfig::new(k, config.seed);
            cfg.alpha = config.lda.alpha.unwrap_or(cfg.alpha);
            cfg.beta = config.lda.beta.unwrap_or(cfg.beta);
            cfg.max_iter = config.lda.max_iter;
            cfg.tol = config.lda.tol;
            let model = fit_lda_restarts(&corpus.tf, &cfg, config.lda.restarts)?;
            if !model.converged {
                log::warn!("lda k={k}: not converged after {} iterations", model.n_iter);
            }
            let sidecar = serde_json::json!({
                "method": "lda",
                "config": model.config,
                "restarts": config.lda.restarts,
                "converged": model.converged,
                "iterations": model.n_iter,
                "elbo_trace": model.elbo_trace,
            });
            Ok(TopicModelResult {
                method,
                k,
                doc_topic: model.doc_topic,
                topic_term: model.topic_term,
                company_topic: None,
                sidecar,
            })
        }
        Method::Nmf => {
            let cfg = NmfConfig {
                max_iter: config.nmf.max_iter,
                tol: config.nmf.tol,
                ..NmfConfig::new(k, config.seed)
            };
            let model = fit_nmf(&corpus.tfidf, &cfg)?;
            let sidecar = serde_json::json!({
                "method": "nmf",
                "config": cfg,
                "converged": model.converged,
                "iterations": model.n_iter,
                "objective_trace": model.objective_trace,
            });
            Ok(TopicModelResult {
                method,
                k,
                doc_topic: model.doc_topic,
                topic_term: model.topic_term,
                company_topic: None,
                sidecar,
            })
        }
        Method::Ntf => {
            let cfg = NtfConfig {
                max_sweeps: config.ntf.max_sweeps,
                tol: config.ntf.tol,
                ..NtfConfig::new(k, config.seed)
            };
            let model = fit_ntf_restarts(&corpus.tensor, &cfg, config.ntf.restarts)?;
            let sidecar = serde_json::json!({
                "method": "ntf",
                "config": NtfConfig { seed: model.seed, ..cfg },
                "restarts": config.ntf.restarts,
                "converged": model.converged,
                "sweeps": model.n_sweeps,
                "rescued_components": model.rescued_components,
                "error_trace": model.error_trace,
            });
            Ok(TopicModelResult {
                method,
                k,
                doc_topic: model.doc_factor,
                topic_term: model.term_factor.t().to_owned(),
                company_topic: Some(model.company_factor),
                sidecar,
            })
        }
    }
}

fn l1_rows(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    for mut row in out.rows_mut() {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        }
    }
    out
}

/// Silhouette of the argmax grouping, or the reason it is undefined.
fn grouping_silhouette(
    points: ArrayView2<'_, f64>,
    labels: &[usize],
    rows: SilhouetteRows,
    what: &str,
    notices: &mut Vec<String>,
) -> Result<Option<SilhouetteResult>> {
    if points.ncols() < 2 {
        notices.push(format!("{what} silhouette skipped: K<2"));
        return Ok(None);
    }
    let prepared;
    let points = match rows {
        SilhouetteRows::Raw => points,
        SilhouetteRows::L1 => {
            prepared = l1_rows(points);
            prepared.view()
        }
    };
    match silhouette(points, labels, Metric::Euclidean) {
        Ok(s) => Ok(Some(s)),
        Err(e @ (Error::SingleCluster | Error::TooFewSamples { .. })) => {
            notices.push(format!("{what} silhouette undefined: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Evaluation of one fitted cell plus the per-sample tables behind it.
#[derive(Debug, Clone)]
pub struct CellEvaluation {
    pub report: EvaluationReport,
    pub doc_labels: Vec<usize>,
    pub doc_silhouette: Option<SilhouetteResult>,
}

pub fn evaluate_result(
    result: &TopicModelResult,
    corpus: &PreparedCorpus,
    config: &RunConfig,
) -> Result<CellEvaluation> {
    let mut notices = Vec::new();
    let k = result.k;
    let assignment = argmax_assign(result.doc_topic.view(), &corpus.doc_ids)?;
    let doc_silhouette = grouping_silhouette(
        result.doc_topic.view(),
        &assignment.labels,
        config.silhouette_rows,
        "document",
        &mut notices,
    )?;

    let company_silhouette = match &result.company_topic {
        Some(ct) => {
            let companies = argmax_assign(ct.view(), corpus.tensor.company_ids())?;
            grouping_silhouette(
                ct.view(),
                &companies.labels,
                config.silhouette_rows,
                "company",
                &mut notices,
            )?
            .map(|s| s.mean)
        }
        None => None,
    };

    let n = config.n_keywords.min(corpus.vocab.len());
    if n < config.n_keywords {
        notices.push(format!(
            "keyword lists shortened to {n}: vocabulary has only {n} terms"
        ));
    }
    let keywords = top_keywords(result.topic_term.view(), &corpus.vocab, n)?;
    let groups = group_frequent_terms(&corpus.tf, &corpus.vocab, &assignment, n)?;
    let matching = keyword_match(&keywords, &groups.terms)?;
    for g in &groups.empty_groups {
        notices.push(format!("topic {g} received no documents"));
    }

    let (decisive, zero_rows) = if k >= 2 {
        let d = decisiveness(result.doc_topic.view())?;
        (Some(d.mean_std), d.zero_rows)
    } else {
        notices.push("decisiveness skipped: K<2".into());
        (None, Vec::new())
    };

    let companies = corpus.tensor.company_ids().to_vec();
    let table = crosstab(
        corpus.tensor.doc_company(),
        companies.len(),
        &assignment.labels,
        k,
    )?;
    let report = EvaluationReport {
        method: result.method.to_string(),
        k,
        silhouette: doc_silhouette.as_ref().map(|s| s.mean),
        company_silhouette,
        keyword_match: matching,
        keywords,
        group_terms: groups.terms,
        empty_groups: groups.empty_groups,
        decisiveness: decisive,
        decisiveness_zero_rows: zero_rows,
        assignment: AssignmentSummary {
            topic_sizes: assignment.topic_sizes(),
            companies,
            company_topic_counts: table,
        },
        notices,
    };
    Ok(CellEvaluation {
        report,
        doc_labels: assignment.labels,
        doc_silhouette,
    })
}

pub fn cell_dir(out: &Path, method: Method, k: usize) -> PathBuf {
    out.join(method.as_str()).join(format!("k{k}"))
}

fn write_cell(
    dir: &Path,
    result: &TopicModelResult,
    eval: &CellEvaluation,
    corpus: &PreparedCorpus,
) -> Result<()> {
    entity_topic_csv("doc_id", &corpus.doc_ids, result.doc_topic.view())?
        .write_to(&dir.join("doc_topic.csv"))?;
    topic_term_csv(corpus.vocab.terms(), result.topic_term.view())?
        .write_to(&dir.join("topic_term.csv"))?;
    if let Some(ct) = &result.company_topic {
        entity_topic_csv("company_id", corpus.tensor.company_ids(), ct.view())?
            .write_to(&dir.join("company_topic.csv"))?;
    }

    let mut sil = CsvTable::new(["doc_id", "topic", "silhouette"])?;
    for (i, id) in corpus.doc_ids.iter().enumerate() {
        let value = eval.doc_silhouette.as_ref().map(|s| s.per_sample[i]);
        sil.row([id.clone(), eval.doc_labels[i].to_string(), opt(value)])?;
    }
    sil.write_to(&dir.join("silhouette.csv"))?;

    let mut kw = CsvTable::new(["topic", "rank", "model_keyword", "group_term"])?;
    let report = &eval.report;
    for (t, words) in report.keywords.iter().enumerate() {
        for (rank, word) in words.iter().enumerate() {
            let group = report.group_terms[t].get(rank).cloned().unwrap_or_default();
            kw.row([t.to_string(), (rank + 1).to_string(), word.clone(), group])?;
        }
    }
    kw.write_to(&dir.join("keywords.csv"))?;

    write_json(&dir.join("report.json"), report)?;
    write_json(&dir.join("model.json"), &result.sidecar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: Method,
    pub k: usize,
    pub ok: bool,
    pub error: Option<String>,
    pub seconds: f64,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub parallel: bool,
    pub config: RunConfig,
    pub corpus: CorpusDigest,
    pub cells: Vec<CellRecord>,
    pub failed_cells: usize,
    pub selection: Option<Selection>,
    pub notices: Vec<String>,
}

/// Successful cell outcome kept for the summary tables.
struct CellOutcome {
    method: Method,
    k: usize,
    report: EvaluationReport,
}

fn run_cell(
    method: Method,
    k: usize,
    corpus: &PreparedCorpus,
    config: &RunConfig,
) -> (CellRecord, Option<CellOutcome>) {
    let start = Instant::now();
    let attempt = catch_unwind(AssertUnwindSafe(|| -> Result<CellEvaluation> {
        let result = fit_method(method, k, corpus, config)?;
        let eval = evaluate_result(&result, corpus, config)?;
        write_cell(&cell_dir(&config.out, method, k), &result, &eval, corpus)?;
        Ok(eval)
    }));
    let seconds = start.elapsed().as_secs_f64();
    let outcome = match attempt {
        Ok(r) => r.map_err(|e| e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .map_or_else(|| "panic".to_string(), |m| format!("panic: {m}"))),
    };
    match outcome {
        Ok(eval) => {
            log::info!("{method} k={k}: done in {seconds:.2}s");
            let record = CellRecord {
                method,
                k,
                ok: true,
                error: None,
                seconds,
                notices: eval.report.notices.clone(),
            };
            (
                record,
                Some(CellOutcome {
                    method,
                    k,
                    report: eval.report,
                }),
            )
        }
        Err(message) => {
            log::error!("{method} k={k}: {message}");
            let record = CellRecord {
                method,
                k,
                ok: false,
                error: Some(format!("{method} k={k}: {message}")),
                seconds,
                notices: Vec::new(),
            };
            (record, None)
        }
    }
}

fn write_summaries(
    summary_dir: &Path,
    outcomes: &[CellOutcome],
    selection: Option<&Selection>,
) -> Result<()> {
    let mut sil = CsvTable::new(["method", "k", "silhouette", "company_silhouette"])?;
    let mut kw = CsvTable::new(["method", "k", "keyword_match_ratio", "empty_topics"])?;
    let mut dec = CsvTable::new(["method", "k", "decisiveness", "selected"])?;
    for o in outcomes {
        let (m, k) = (o.method.to_string(), o.k.to_string());
        sil.row([
            m.clone(),
            k.clone(),
            opt(o.report.silhouette),
            opt(o.report.company_silhouette),
        ])?;
        kw.row([
            m.clone(),
            k.clone(),
            opt(o.report.keyword_match.mean),
            o.report.empty_groups.len().to_string(),
        ])?;
        let selected = selection.is_some_and(|s| {
            s.per_method
                .iter()
                .any(|c| c.method == o.method && c.k == o.k)
        });
        dec.row([m, k, opt(o.report.decisiveness), selected.to_string()])?;
    }
    sil.write_to(&summary_dir.join("silhouette_by_k.csv"))?;
    kw.write_to(&summary_dir.join("keyword_match_by_k.csv"))?;
    dec.write_to(&summary_dir.join("decisiveness_by_method.csv"))?;

    let mut sel = CsvTable::new([
        "scope",
        "method",
        "k",
        "silhouette",
        "keyword_match_ratio",
        "candidates",
    ])?;
    if let Some(s) = selection {
        let rows = s
            .per_method
            .iter()
            .map(|c| ("method", c))
            .chain(std::iter::once(("overall", &s.overall)));
        for (scope, c) in rows {
            let candidates: Vec<String> = c.candidates.iter().map(|k| k.to_string()).collect();
            sel.row([
                scope.to_string(),
                c.method.to_string(),
                c.k.to_string(),
                opt(c.silhouette),
                opt(c.keyword_ratio),
                candidates.join(" "),
            ])?;
        }
    }
    sel.write_to(&summary_dir.join("selection.csv"))
}

fn export_inputs(dir: &Path, corpus: &PreparedCorpus) -> Result<()> {
    write_atomic(&dir.join("tf.txt"), write_sparse(&corpus.tf).as_bytes())?;
    write_atomic(
        &dir.join("tfidf.txt"),
        write_sparse(&corpus.tfidf).as_bytes(),
    )?;
    write_atomic(
        &dir.join("tensor.txt"),
        write_sparse(&corpus.tensor).as_bytes(),
    )?;
    let mut vocab = CsvTable::new(["index", "term", "doc_freq", "term_freq"])?;
    for (i, term) in corpus.vocab.terms().iter().enumerate() {
        vocab.row([
            i.to_string(),
            term.clone(),
            corpus.vocab.doc_freq()[i].to_string(),
            corpus.vocab.term_freq()[i].to_string(),
        ])?;
    }
    vocab.write_to(&dir.join("vocabulary.csv"))?;
    let mut companies = CsvTable::new(["index", "company_id"])?;
    for (i, c) in corpus.tensor.company_ids().iter().enumerate() {
        companies.row([i.to_string(), c.clone()])?;
    }
    companies.write_to(&dir.join("companies.csv"))
}

/// Runs every (method, K) cell on an already loaded corpus.
pub fn run_on_documents(
    raw: &[RawDocument],
    config: &RunConfig,
) -> std::result::Result<RunManifest, RunError> {
    let config = config.clone().normalized().map_err(RunError::Config)?;
    let corpus = prepare(raw, &config).map_err(RunError::Corpus)?;
    let summary_dir = config.out.join("summary");
    std::fs::create_dir_all(&summary_dir)
        .map_err(|e| RunError::Output(Error::io(&summary_dir, e)))?;
    if config.export_matrices {
        export_inputs(&config.out.join("data"), &corpus).map_err(RunError::Output)?;
    }

    let mut notices = Vec::new();
    if config.k_values.iter().any(|&k| k < 2) {
        notices.push("K<2 cells are fitted but have no silhouette".to_string());
    }
    let cells: Vec<(Method, usize)> = config
        .methods
        .iter()
        .flat_map(|&m| config.k_values.iter().map(move |&k| (m, k)))
        .collect();
    log::info!(
        "{} documents, {} companies, {} terms; {} cells",
        corpus.digest.documents,
        corpus.digest.companies,
        corpus.digest.vocabulary,
        cells.len()
    );
    let results = par::with_threads(config.jobs, || {
        par::map_slice(&cells, |&(m, k)| run_cell(m, k, &corpus, &config))
    });
    let (records, outcomes): (Vec<CellRecord>, Vec<Option<CellOutcome>>) =
        results.into_iter().unzip();
    let outcomes: Vec<CellOutcome> = outcomes.into_iter().flatten().collect();

    let summaries: Vec<CellSummary> = outcomes
        .iter()
        .map(|o| CellSummary {
            method: o.method,
            k: o.k,
            silhouette: o.report.silhouette,
            keyword_ratio: o.report.keyword_match.mean,
        })
        .collect();
    let selection = if summaries.is_empty() {
        notices.push("every cell failed; nothing to select".to_string());
        None
    } else {
        Some(select_best(&summaries, config.selection_margin).map_err(RunError::Output)?)
    };
    write_summaries(&summary_dir, &outcomes, selection.as_ref()).map_err(RunError::Output)?;

    let failed_cells = records.iter().filter(|r| !r.ok).count();
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        parallel: par::is_parallel(),
        config,
        corpus: corpus.digest,
        cells: records,
        failed_cells,
        selection,
        notices,
    };
    write_json(&summary_dir.join("manifest.json"), &manifest).map_err(RunError::Output)?;
    Ok(manifest)
}

/// Loads the configured corpus and runs the full experiment.
pub fn run_experiment(config: &RunConfig) -> std::result::Result<RunManifest, RunError> {
    let config = config.clone().normalized().map_err(RunError::Config)?;
    let raw = load_corpus(&config.corpus, config.format).map_err(RunError::Corpus)?;
    run_on_documents(&raw, &config)
}
