use std::path::Path;

use topicbench::corpus::RawDocument;
use topicbench::experiment::{
    prepare, run_on_documents, select_best, CellSummary, Method, RunConfig,
};

fn doc(id: &str, company: &str, text: &str) -> RawDocument {
    RawDocument {
        doc_id: id.into(),
        company_id: company.into(),
        text: text.into(),
        year: None,
        report_type: None,
        category: None,
    }
}

fn toy() -> Vec<RawDocument> {
    vec![
        doc("a", "x", "coal seam basin coal seam"),
        doc("b", "x", "coal basin drilling seam"),
        doc("c", "y", "gold vein assay gold"),
        doc("d", "y", "gold vein sampling assay"),
        doc("e", "z", "copper porphyry copper drilling"),
    ]
}

fn config(out: &Path) -> RunConfig {
    RunConfig {
        corpus: "inline".into(),
        out: out.to_path_buf(),
        n_keywords: 3,
        ..RunConfig::default()
    }
}

#[test]
fn single_k_below_two_records_a_notice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        methods: vec![Method::Lda],
        k_values: vec![1],
        ..config(dir.path())
    };
    let docs = &toy()[..3];
    let manifest = run_on_documents(docs, &cfg).unwrap();
    assert_eq!(manifest.failed_cells, 0);
    assert!(dir.path().join("lda/k1/doc_topic.csv").is_file());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("lda/k1/report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["silhouette"].is_null());
    assert!(report["notices"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("K<2")));
    let sel = manifest.selection.unwrap();
    assert!(sel.overall.notices.iter().any(|n| n.contains("no sweep")));
}

#[test]
fn failing_cells_do_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        k_values: vec![2, 9],
        ..config(dir.path())
    };
    let manifest = run_on_documents(&toy(), &cfg).unwrap();
    assert_eq!(
        manifest.failed_cells, 3,
        "K=9 exceeds the document count for every method"
    );
    assert_eq!(topicbench::experiment::manifest_exit_code(&manifest), 3);
    for m in ["lda", "nmf", "ntf"] {
        assert!(dir.path().join(m).join("k2/report.json").is_file());
    }
    let sil = std::fs::read_to_string(dir.path().join("summary/silhouette_by_k.csv")).unwrap();
    assert_eq!(sil.lines().count(), 4);
}

#[test]
fn reports_reconcile_with_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        k_values: vec![2, 3],
        ..config(dir.path())
    };
    let manifest = run_on_documents(&toy(), &cfg).unwrap();
    let n_docs = manifest.corpus.documents;
    for m in ["lda", "nmf", "ntf"] {
        for k in [2, 3] {
            let path = dir.path().join(m).join(format!("k{k}/report.json"));
            let r: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
            let sizes: u64 = r["assignment"]["topic_sizes"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap())
                .sum();
            assert_eq!(sizes as usize, n_docs, "{m} k={k}");
            let table = r["assignment"]["company_topic_counts"].as_array().unwrap();
            let per_company = [2u64, 2, 1];
            for (row, want) in table.iter().zip(per_company) {
                let total: u64 = row
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_u64().unwrap())
                    .sum();
                assert_eq!(total, want);
            }
        }
    }
}

#[test]
fn digest_reconciles_with_shapes() {
    let cfg = config(Path::new("unused"));
    let corpus = prepare(&toy(), &cfg).unwrap();
    assert_eq!(corpus.tf.n_docs(), corpus.digest.documents);
    assert_eq!(corpus.tf.n_terms(), corpus.digest.vocabulary);
    assert_eq!(
        corpus.tensor.shape(),
        (
            corpus.digest.documents,
            corpus.digest.companies,
            corpus.digest.vocabulary
        )
    );
    assert_eq!(corpus.tf.nnz(), corpus.digest.tf_nnz);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let cfg = RunConfig {
            k_values: vec![2, 3],
            export_matrices: true,
            ..config(out)
        };
        run_on_documents(&toy(), &cfg).unwrap();
    };
    run(a.path());
    run(b.path());
    for rel in [
        "summary/silhouette_by_k.csv",
        "summary/keyword_match_by_k.csv",
        "summary/decisiveness_by_method.csv",
        "summary/selection.csv",
        "lda/k3/doc_topic.csv",
        "nmf/k2/topic_term.csv",
        "ntf/k3/company_topic.csv",
        "ntf/k2/report.json",
        "data/tensor.txt",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(rel)).unwrap(),
            std::fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn paper_selection_example() {
    let cells = [
        CellSummary {
            method: Method::Lda,
            k: 2,
            silhouette: Some(0.30),
            keyword_ratio: None,
        },
        CellSummary {
            method: Method::Lda,
            k: 3,
            silhouette: Some(0.31),
            keyword_ratio: Some(0.55),
        },
        CellSummary {
            method: Method::Lda,
            k: 4,
            silhouette: Some(0.31),
            keyword_ratio: Some(0.73),
        },
    ];
    assert_eq!(select_best(&cells, 0.02).unwrap().overall.k, 4);
}
