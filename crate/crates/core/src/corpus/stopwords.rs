use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

const ENGLISH: &str = include_str!("../../data/stopwords_en.txt");

/// Domain-specific additions for mining project reports.
pub const REPORT_EXTRAS: [&str; 13] = [
    "appendix",
    "area",
    "australia",
    "fax",
    "figure",
    "ltd",
    "map",
    "page",
    "phone",
    "project",
    "report",
    "year",
    "within",
];

/// Stop-word list: a general English base plus corpus-specific extras.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    pub base: BTreeSet<String>,
    pub extra: BTreeSet<String>,
}

impl StopwordList {
    /// The 179-word English base list with the 13 report extras.
    pub fn english() -> Self {
        Self::english_with_extras(REPORT_EXTRAS.iter().copied())
    }

    /// The English base list with a caller-supplied extras set.
    pub fn english_with_extras<I, S>(extras: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            base: english_base(),
            extra: extras
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.base.contains(token) || self.extra.contains(token)
    }

    pub fn len(&self) -> usize {
        self.base.union(&self.extra).count()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty() && self.extra.is_empty()
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        Self::english()
    }
}

fn english_base() -> BTreeSet<String> {
    ENGLISH
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Drops every token found in `stops`, preserving order.
pub fn remove_stopwords<S: AsRef<str>>(tokens: &[S], stops: &StopwordList) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !stops.contains(t))
        .map(str::to_string)
        .collect()
}
