//! Planted-topic corpus generator for protocol checks and demos.
//!
//! Every topic owns a disjoint set of invented words; companies are nested
//! in topics (each company reports on a single topic); each document mixes
//! its company's topic with a minority share of the next topic, and mixes the
//! facets (halves of a topic's vocabulary) in random proportions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{stem, RawDocument, StopwordList};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n_docs: usize,
    pub n_topics: usize,
    /// Must be a multiple of `n_topics`.
    pub n_companies: usize,
    pub terms_per_topic: usize,
    pub doc_len: usize,
    /// Expected fraction of a document's tokens drawn from its main topic.
    pub main_share: f64,
    /// Exponent of the Zipf-shaped term weights inside a topic.
    pub zipf: f64,
    /// Each topic's vocabulary is split into this many facets; every
    /// document mixes the facets of a topic in uniformly random proportions.
    pub facets: usize,
    /// Draw each document's minority topic as the next topic (cyclically)
    /// instead of a uniformly drawn other topic.
    pub cyclic_secondary: bool,
    /// Probability that a document's main topic is its company's topic
    /// rather than a uniformly drawn one.
    pub company_affinity: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_docs: 60,
            n_topics: 4,
            n_companies: 8,
            terms_per_topic: 40,
            doc_len: 150,
            main_share: 0.85,
            zipf: 0.5,
            facets: 2,
            cyclic_secondary: true,
            company_affinity: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCorpus {
    pub documents: Vec<RawDocument>,
    /// Main topic of every document.
    pub doc_topics: Vec<usize>,
    /// Main topic of every company, in the order companies are numbered.
    pub company_topics: Vec<usize>,
    /// Vocabulary of each topic, facet by facet, most frequent first
    /// within a facet.
    pub topic_terms: Vec<Vec<String>>,
}

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aou";

/// Five-letter consonant-vowel words that survive preprocessing unchanged.
fn word_pool(count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let stops = StopwordList::english();
    let mut pool = Vec::new();
    for &c1 in CONSONANTS {
        for &v1 in VOWELS {
            for &c2 in CONSONANTS {
                for &v2 in VOWELS {
                    for &c3 in CONSONANTS {
                        let w = String::from_utf8(vec![c1, v1, c2, v2, c3]).expect("ascii");
                        if stem(&w) == w && !stops.contains(&w) {
                            pool.push(w);
                        }
                    }
                }
            }
        }
    }
    if pool.len() < count {
        return Err(Error::InvalidInput(format!(
            "cannot invent {count} distinct words"
        )));
    }
    pool.shuffle(rng);
    pool.truncate(count);
    Ok(pool)
}

/// Generates a seeded planted corpus.
pub fn planted_corpus(config: &PlantedConfig) -> Result<PlantedCorpus> {
    let PlantedConfig {
        n_docs,
        n_topics,
        n_companies,
        terms_per_topic,
        doc_len,
        main_share,
        zipf,
        facets,
        cyclic_secondary,
        company_affinity,
        seed,
    } = *config;
    if n_topics == 0 || n_companies == 0 || n_companies % n_topics != 0 {
        return Err(Error::InvalidInput(
            "company count must be a positive multiple of the topic count".into(),
        ));
    }
    if facets == 0 || terms_per_topic % facets != 0 {
        return Err(Error::InvalidInput(
            "terms per topic must be a positive multiple of the facet count".into(),
        ));
    }
    if n_docs < n_companies || terms_per_topic == 0 || doc_len == 0 {
        return Err(Error::InvalidInput(
            "every company needs a document and every document a token".into(),
        ));
    }
    if !(0.0..=1.0).contains(&company_affinity) {
        return Err(Error::InvalidInput(format!(
            "company_affinity {company_affinity} is not a probability"
        )));
    }
    if !(0.0..=1.0).contains(&main_share) || (n_topics == 1 && main_share < 1.0) {
        return Err(Error::InvalidInput(format!(
            "main_share {main_share} is not usable"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = word_pool(n_topics * terms_per_topic, &mut rng)?;
    let topic_terms: Vec<Vec<String>> = words.chunks(terms_per_topic).map(|c| c.to_vec()).collect();
    let per_facet = terms_per_topic / facets;
    let weights: Vec<f64> = (0..per_facet)
        .map(|r| 1.0 / ((r + 1) as f64).powf(zipf))
        .collect();
    let term_dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let per_topic = n_companies / n_topics;
    let company_topics: Vec<usize> = (0..n_companies).map(|c| c / per_topic).collect();

    let mut documents = Vec::with_capacity(n_docs);
    let mut doc_topics = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let company = d % n_companies;
        let main = if rng.random::<f64>() < company_affinity {
            company_topics[company]
        } else {
            rng.random_range(0..n_topics)
        };
        let secondary = if n_topics > 1 && cyclic_secondary {
            (main + 1) % n_topics
        } else if n_topics > 1 {
            let offset = rng.random_range(1..n_topics);
            (main + offset) % n_topics
        } else {
            main
        };
        // Uniform point on the facet simplex (normalized exponentials).
        let facet_weights: Vec<f64> = (0..facets)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let facet_dist =
            WeightedIndex::new(&facet_weights).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let tokens: Vec<&str> = (0..doc_len)
            .map(|_| {
                let topic = if rng.random::<f64>() < main_share {
                    main
                } else {
                    secondary
                };
                let facet = facet_dist.sample(&mut rng);
                topic_terms[topic][facet * per_facet + term_dist.sample(&mut rng)].as_str()
            })
            .collect();
        documents.push(RawDocument {
            doc_id: format!("doc{d:04}"),
            company_id: format!("company{company:02}"),
            text: tokens.join(" "),
            year: None,
            report_type: None,
            category: None,
        });
        doc_topics.push(main);
    }

    Ok(PlantedCorpus {
        documents,
        doc_topics,
        company_topics,
        topic_terms,
    })
}

impl PlantedCorpus {
    /// Writes the documents as JSONL.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for doc in &self.documents {
            out.push_str(&serde_json::to_string(doc)?);
            out.push('\n');
        }
        Ok(out)
    }
}
