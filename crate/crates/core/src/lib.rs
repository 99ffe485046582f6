//! Topic-model comparison toolkit.
//!
//! Loads a report corpus with company metadata, builds TF / TF-IDF matrices
//! and a document×company×term tensor, fits LDA, NMF and nonnegative CP
//! tensor factorization, and scores the resulting document groupings with
//! silhouette analysis, keyword matching and decisiveness statistics.

pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod lda;
pub mod nmf;
pub mod ntf;
pub mod numfmt;
pub mod par;
pub mod synth;
pub mod vectorize;

pub use error::{Error, Result};
