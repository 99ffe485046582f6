mod common;

use ndarray::Axis;
use topicbench::evaluate::{argmax_assign, purity};
use topicbench::lda::{fit_lda, LdaConfig};
use topicbench::vectorize::{DocTermMatrix, Weighting};

/// 20 documents over two disjoint 10-term vocabularies.
fn two_topic_corpus() -> (DocTermMatrix, Vec<usize>) {
    let mut r = common::rng(11);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for d in 0..20 {
        let group = d % 2;
        let mut counts = vec![0.0; 20];
        for _ in 0..40 {
            counts[group * 10 + rand::Rng::random_range(&mut r, 0..10)] += 1.0;
        }
        rows.push(
            counts
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c > 0.0)
                .collect(),
        );
        labels.push(group);
    }
    (
        DocTermMatrix::from_rows(20, rows, Weighting::Tf).unwrap(),
        labels,
    )
}

#[test]
fn planted_two_topics_are_separated() {
    let (tf, labels) = two_topic_corpus();
    let model = fit_lda(&tf, &LdaConfig::new(2, 0)).unwrap();
    let ids: Vec<String> = (0..20).map(|d| d.to_string()).collect();
    let got = argmax_assign(model.doc_topic.view(), &ids).unwrap().labels;
    assert_eq!(purity(&got, &labels).unwrap(), 1.0);
}

#[test]
fn rows_are_distributions_and_elbo_rises() {
    for seed in 0..20 {
        let tf = common::random_tf(seed, 25, 30);
        let model = fit_lda(&tf, &LdaConfig::new(3, seed)).unwrap();
        for m in [&model.doc_topic, &model.topic_term] {
            for row in m.axis_iter(Axis(0)) {
                assert!((row.sum() - 1.0).abs() <= 1e-9, "seed {seed}");
                assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
        assert!(
            common::non_decreasing(&model.elbo_trace, 1e-8),
            "seed {seed}: {:?}",
            model.elbo_trace
        );
    }
}

#[test]
fn single_topic_matches_closed_form() {
    let tf = common::random_tf(3, 12, 15);
    let model = fit_lda(&tf, &LdaConfig::new(1, 9)).unwrap();
    let (_, v) = tf.shape();
    let beta = model.config.beta;
    let mut counts = vec![0.0; v];
    for (_, t, c) in tf.iter() {
        counts[t] += c;
    }
    let n: f64 = counts.iter().sum();
    for (t, count) in counts.iter().enumerate() {
        let expected = (beta + count) / (v as f64 * beta + n);
        assert!(
            (model.topic_term[[0, t]] - expected).abs() <= 1e-15,
            "term {t}"
        );
    }
    assert!(model.doc_topic.iter().all(|&p| p == 1.0));
}

#[test]
fn seeded_runs_are_bitwise_equal() {
    let tf = common::random_tf(5, 15, 20);
    let a = fit_lda(&tf, &LdaConfig::new(3, 42)).unwrap();
    let b = fit_lda(&tf, &LdaConfig::new(3, 42)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn document_permutation_is_equivariant() {
    let tf = common::random_tf(8, 18, 25);
    let n = tf.n_docs();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let rows = perm
        .iter()
        .map(|&d| {
            let (cols, vals) = tf.row(d);
            cols.iter().copied().zip(vals.iter().copied()).collect()
        })
        .collect();
    let shuffled = DocTermMatrix::from_rows(tf.n_terms(), rows, Weighting::Tf).unwrap();
    let cfg = LdaConfig {
        tol: 1e-12,
        max_iter: 500,
        ..LdaConfig::new(3, 1)
    };
    let a = fit_lda(&tf, &cfg).unwrap();
    let b = fit_lda(&shuffled, &cfg).unwrap();
    for (i, &d) in perm.iter().enumerate() {
        for k in 0..3 {
            assert!((a.doc_topic[[d, k]] - b.doc_topic[[i, k]]).abs() < 1e-6);
        }
    }
    // Same seed, same topic initialization: topics keep their labels, so
    // comparing sorted fingerprints per topic is the same as comparing rows.
    let fingerprint = |m: &ndarray::Array2<f64>| -> Vec<Vec<i64>> {
        let mut f: Vec<Vec<i64>> = m
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| (v * 1e6).round() as i64).collect())
            .collect();
        f.sort();
        f
    };
    assert_eq!(fingerprint(&a.topic_term), fingerprint(&b.topic_term));
}
