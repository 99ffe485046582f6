//! Corpus loading and the text preprocessing pipeline.
//!
//! Documents go through three stages in a fixed order: tokenization,
//! stop-word removal, then Porter stemming. Stop-words are matched before
//! stemming, so inflected forms of a stop-word ("reporting") survive.

mod porter;
mod stopwords;
mod tokenize;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub use porter::stem;
pub use stopwords::{remove_stopwords, StopwordList, REPORT_EXTRAS};
pub use tokenize::{tokenize, MIN_TOKEN_LEN};

/// A report as loaded from disk, with its company metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub company_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// The cleaned token stream of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

impl TokenizedDocument {
    /// True when preprocessing removed every token.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// One JSON object per line.
    Jsonl,
    /// A directory of `*.txt` files plus a `manifest.csv` of `doc_id,company_id`.
    TextDir,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "text-dir" | "textdir" | "dir" => Ok(CorpusFormat::TextDir),
            other => Err(Error::Config(format!("unknown corpus format \"{other}\""))),
        }
    }
}

/// Name of the sidecar manifest expected inside a text directory.
pub const TEXT_DIR_MANIFEST: &str = "manifest.csv";

/// Loads a corpus, preserving file order and validating document invariants.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RawDocument>> {
    let docs = match format {
        CorpusFormat::Jsonl => load_jsonl(path)?,
        CorpusFormat::TextDir => load_text_dir(path)?,
    };
    if docs.is_empty() {
        log::warn!("corpus {} contains no documents", path.display());
    }
    Ok(docs)
}

#[derive(Deserialize)]
struct JsonRecord {
    doc_id: Option<String>,
    company_id: Option<String>,
    text: Option<String>,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    report_type: Option<String>,
    #[serde(default)]
    category: Option<String>,
}

fn load_jsonl(path: &Path) -> Result<Vec<RawDocument>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let malformed = |message: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let rec: JsonRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let doc_id = rec
            .doc_id
            .ok_or_else(|| malformed("missing field doc_id".into()))?;
        let company_id = rec
            .company_id
            .ok_or_else(|| malformed("missing field company_id".into()))?;
        let text = rec
            .text
            .ok_or_else(|| malformed("missing field text".into()))?;
        let doc = RawDocument {
            doc_id,
            company_id,
            text,
            year: rec.year,
            report_type: rec.report_type,
            category: rec.category,
        };
        validate(&doc).map_err(|e| match e {
            Error::InvalidInput(message) => malformed(message),
            other => other,
        })?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocId(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn load_text_dir(dir: &Path) -> Result<Vec<RawDocument>> {
    let manifest_path = dir.join(TEXT_DIR_MANIFEST);
    let mut reader = csv::Reader::from_path(&manifest_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&manifest_path, io),
        other => Error::MalformedRecord {
            path: manifest_path.clone(),
            line: 0,
            message: format!("{other:?}"),
        },
    })?;
    let mut companies: HashMap<String, String> = HashMap::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let (Some(doc_id), Some(company_id)) = (row.get(0), row.get(1)) else {
            return Err(Error::MalformedRecord {
                path: manifest_path.clone(),
                line: idx + 2,
                message: "expected doc_id,company_id".into(),
            });
        };
        companies.insert(doc_id.trim().to_string(), company_id.trim().to_string());
    }

    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    files.sort();

    let mut docs = Vec::with_capacity(files.len());
    let mut seen = HashSet::new();
    for file in files {
        let doc_id = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let company_id = companies
            .get(&doc_id)
            .cloned()
            .ok_or_else(|| Error::UnknownCompany {
                doc_id: doc_id.clone(),
            })?;
        let doc = RawDocument {
            doc_id,
            company_id,
            text,
            year: None,
            report_type: None,
            category: None,
        };
        validate(&doc)?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocId(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn validate(doc: &RawDocument) -> Result<()> {
    if doc.doc_id.trim().is_empty() {
        return Err(Error::InvalidInput("doc_id is empty".into()));
    }
    if doc.company_id.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "document \"{}\" has an empty company_id",
            doc.doc_id
        )));
    }
    if doc.text.trim().is_empty() {
        return Err(Error::EmptyText(doc.doc_id.clone()));
    }
    Ok(())
}

/// Maps each document id to its company id.
pub fn company_map(docs: &[RawDocument]) -> BTreeMap<String, String> {
    docs.iter()
        .map(|d| (d.doc_id.clone(), d.company_id.clone()))
        .collect()
}

/// Tokenize, remove stop-words, stem.
pub fn preprocess(doc: &RawDocument, stops: &StopwordList) -> TokenizedDocument {
    let tokens = remove_stopwords(&tokenize(&doc.text), stops)
        .iter()
        .map(|t| stem(t))
        .collect();
    TokenizedDocument {
        doc_id: doc.doc_id.clone(),
        tokens,
    }
}

/// Result of preprocessing a whole corpus.
#[derive(Debug, Clone, Default)]
pub struct PreprocessedCorpus {
    /// Documents with at least one token, in input order.
    pub documents: Vec<TokenizedDocument>,
    /// Ids of documents left with no tokens; excluded from the matrices.
    pub empty_doc_ids: Vec<String>,
}

/// Preprocesses every document (in parallel when enabled), keeping input order.
pub fn preprocess_corpus(docs: &[RawDocument], stops: &StopwordList) -> PreprocessedCorpus {
    let processed = par::map_slice(docs, |d| preprocess(d, stops));
    let mut out = PreprocessedCorpus::default();
    for doc in processed {
        if doc.is_empty() {
            log::warn!("document \"{}\" is empty after preprocessing", doc.doc_id);
            out.empty_doc_ids.push(doc.doc_id);
        } else {
            out.documents.push(doc);
        }
    }
    out
}
