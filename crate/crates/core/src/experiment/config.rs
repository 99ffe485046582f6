use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusFormat, RawDocument, REPORT_EXTRAS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lda,
    Nmf,
    Ntf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lda, Method::Nmf, Method::Ntf];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lda => "lda",
            Method::Nmf => "nmf",
            Method::Ntf => "ntf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lda" => Ok(Method::Lda),
            "nmf" => Ok(Method::Nmf),
            "ntf" | "tensor" => Ok(Method::Ntf),
            other => Err(Error::Config(format!("unknown method \"{other}\""))),
        }
    }
}

/// Optional metadata filters; documents lacking a filtered field are dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Filters {
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    pub category: Option<String>,
    pub report_type: Option<String>,
}

impl Filters {
    /// Applies one `key=value` override. `year` sets both bounds.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let year = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|_| Error::Config(format!("filter {key}: \"{v}\" is not a year")))
        };
        match key.trim() {
            "year" => {
                let y = year(value)?;
                self.year_min = Some(y);
                self.year_max = Some(y);
            }
            "year_min" | "year-min" => self.year_min = Some(year(value)?),
            "year_max" | "year-max" => self.year_max = Some(year(value)?),
            "category" => self.category = Some(value.to_string()),
            "report_type" | "report-type" => self.report_type = Some(value.to_string()),
            other => return Err(Error::Config(format!("unknown filter key \"{other}\""))),
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        *self == Filters::default()
    }

    pub fn accepts(&self, doc: &RawDocument) -> bool {
        let year_ok = match (self.year_min, self.year_max) {
            (None, None) => true,
            (lo, hi) => doc
                .year
                .is_some_and(|y| lo.is_none_or(|lo| y >= lo) && hi.is_none_or(|hi| y <= hi)),
        };
        let eq = |want: &Option<String>, have: &Option<String>| match want {
            None => true,
            Some(w) => have.as_deref() == Some(w.as_str()),
        };
        year_ok && eq(&self.category, &doc.category) && eq(&self.report_type, &doc.report_type)
    }
}

/// Which rows feed the silhouette computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SilhouetteRows {
    /// The model's document-topic rows as fitted.
    #[default]
    Raw,
    /// Rows scaled to sum to one.
    L1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSettings {
    /// Defaults to `1/K` when absent.
    pub alpha: Option<f64>,
    /// Defaults to `1/K` when absent.
    pub beta: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    /// Seeded restarts; the fit with the highest ELBO is kept.
    pub restarts: usize,
}

impl Default for LdaSettings {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: None,
            max_iter: 200,
            tol: 1e-6,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfSettings {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NmfSettings {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NtfSettings {
    pub max_sweeps: usize,
    pub tol: f64,
    /// Seeded restarts; the fit with the lowest error is kept.
    pub restarts: usize,
}

impl Default for NtfSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 200,
            tol: 1e-6,
            restarts: 4,
        }
    }
}

/// Everything that determines an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub format: CorpusFormat,
    pub filters: Filters,
    /// Stop-words added to the English base list.
    pub extra_stopwords: Vec<String>,
    pub min_df: usize,
    pub methods: Vec<Method>,
    pub k_values: Vec<usize>,
    pub seed: u64,
    pub lda: LdaSettings,
    pub nmf: NmfSettings,
    pub ntf: NtfSettings,
    /// Keywords per topic used for keyword matching.
    pub n_keywords: usize,
    /// Silhouette margin defining the candidate K set during selection.
    pub selection_margin: f64,
    pub silhouette_rows: SilhouetteRows,
    /// Also write the TF, TF-IDF and tensor inputs in the sparse text format.
    pub export_matrices: bool,
    pub out: PathBuf,
    /// Concurrent (method, K) cells; 0 uses all cores.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::new(),
            format: CorpusFormat::Jsonl,
            filters: Filters::default(),
            extra_stopwords: REPORT_EXTRAS.iter().map(|s| s.to_string()).collect(),
            min_df: 1,
            methods: Method::ALL.to_vec(),
            k_values: (2..=6).collect(),
            seed: 0,
            lda: LdaSettings::default(),
            nmf: NmfSettings::default(),
            ntf: NtfSettings::default(),
            n_keywords: 30,
            selection_margin: 0.02,
            silhouette_rows: SilhouetteRows::default(),
            export_matrices: false,
            out: PathBuf::from("out"),
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sorts and deduplicates methods and K values, then checks invariants.
    pub fn normalized(mut self) -> Result<Self> {
        self.methods.sort();
        self.methods.dedup();
        self.k_values.sort_unstable();
        self.k_values.dedup();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.corpus.as_os_str().is_empty() {
            return fail("no corpus path given");
        }
        if self.out.as_os_str().is_empty() {
            return fail("no output directory given");
        }
        if self.methods.is_empty() {
            return fail("at least one method is required");
        }
        if self.k_values.is_empty() {
            return fail("at least one K value is required");
        }
        if self.k_values.contains(&0) {
            return fail("K values must be at least 1");
        }
        if self.min_df == 0 {
            return fail("min_df must be at least 1");
        }
        if self.n_keywords == 0 {
            return fail("n_keywords must be at least 1");
        }
        if !(self.selection_margin >= 0.0 && self.selection_margin.is_finite()) {
            return fail("selection_margin must be a finite non-negative number");
        }
        let positive = |v: Option<f64>| v.is_none_or(|x| x > 0.0 && x.is_finite());
        if !positive(self.lda.alpha) || !positive(self.lda.beta) {
            return fail("LDA priors must be positive");
        }
        if self.lda.restarts == 0 || self.ntf.restarts == 0 {
            return fail("restart counts must be at least 1");
        }
        if self.lda.max_iter == 0 || self.nmf.max_iter == 0 || self.ntf.max_sweeps == 0 {
            return fail("iteration budgets must be at least 1");
        }
        if [self.lda.tol, self.nmf.tol, self.ntf.tol]
            .iter()
            .any(|t| t.is_nan() || *t < 0.0)
        {
            return fail("tolerances must be non-negative");
        }
        Ok(())
    }
}
