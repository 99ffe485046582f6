//! Runs the full K sweep on a generated planted-topic corpus and prints the
//! summary tables.
//!
//! ```text
//! cargo run --release --example planted -- [out-dir] [corpus-seed]
//! ```

use std::path::PathBuf;

use topicbench::evaluate::{argmax_assign, purity};
use topicbench::experiment::{fit_method, prepare, run_on_documents, Method, RunConfig};
use topicbench::synth::{planted_corpus, PlantedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "planted-out".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let planted = planted_corpus(&PlantedConfig {
        seed,
        ..PlantedConfig::default()
    })?;
    let config = RunConfig {
        corpus: out.join("corpus.jsonl"),
        out: out.clone(),
        ..RunConfig::default()
    };
    let manifest = run_on_documents(&planted.documents, &config)?;
    for name in [
        "silhouette_by_k.csv",
        "keyword_match_by_k.csv",
        "decisiveness_by_method.csv",
        "selection.csv",
    ] {
        println!("== {name}");
        print!(
            "{}",
            std::fs::read_to_string(out.join("summary").join(name))?
        );
    }
    println!("failed cells: {}", manifest.failed_cells);

    let corpus = prepare(&planted.documents, &config)?;
    for method in Method::ALL {
        let result = fit_method(method, 4, &corpus, &config)?;
        let labels = argmax_assign(result.doc_topic.view(), &corpus.doc_ids)?.labels;
        let p = purity(&labels, &planted.doc_topics)?;
        println!("{method} k=4 purity {p:.3}");
    }
    Ok(())
}
