use std::collections::BTreeSet;

use proptest::prelude::*;

use salience_core::rng;

use salience_core::analyze::{
    aggregate_salient_terms, cluster_metrics, kmeans, nearest_neighbors, word_cloud, KMeansParams, NeighborConstraint, Query, TermFilter,
};
use salience_core::corpus::{slice, Corpus, EmbeddingTable, Example, Selector, Vocabulary};
use salience_core::represent::{build_b1_pmi, build_s1_vocab, build_s2_emb, compute_pmi, RepKind, RepMatrix, Row, Smoothing};
use salience_core::sensitivity::{
    counterfactual_change, insert_term, mask_term, masking_change, ModelScorer, ScoreError, SeedList, SensitivityConfig, MASK_TOKEN,
};

const WORDS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

prop_compose! {
    fn example(i: usize, classes: usize)(
        toks in prop::collection::vec(0..WORDS.len(), 0..8),
        sal in prop::collection::vec(-2.0..2.0f64, 8),
        raw in prop::collection::vec(0.01..1.0f64, classes),
        gold in 0..classes,
    ) -> Example {
        let tokens: Vec<&str> = toks.iter().map(|&t| WORDS[t]).collect();
        let s: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / s).collect();
        let pred = salience_core::corpus::argmax(&probs);
        let mut e = Example::annotated(&format!("e{i}"), &tokens, pred, probs, sal[..tokens.len()].to_vec());
        e.gold_label = gold;
        e
    }
}

fn corpus(max: usize) -> impl Strategy<Value = Corpus> {
    (1..=max).prop_flat_map(|n| (0..n).map(|i| example(i, 2)).collect::<Vec<_>>()).prop_map(|exs| Corpus::new("p", exs).unwrap())
}

fn vocab() -> Vocabulary {
    Vocabulary::from_tokens::<&str>(WORDS.iter().map(|s| s.to_string()).collect(), &[], &[]).unwrap()
}

fn dense(points: &[Vec<f64>]) -> RepMatrix {
    let ids = (0..points.len()).map(|i| format!("p{i}")).collect();
    RepMatrix::new(RepKind::B2AvgEmb, points[0].len(), None, false, ids, points.iter().map(|p| Row::Dense(p.clone())).collect())
}

fn points(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.5..10.0f64, dim), 2..max_n)
}

fn sqd(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// p(class 1) grows with the number of "x" tokens; deterministic in the
/// token sequence.
struct CountScorer;

impl ModelScorer for CountScorer {
    fn num_classes(&self) -> usize {
        2
    }

    fn score_batch(&self, inputs: &[Vec<String>]) -> Result<Vec<Vec<f64>>, ScoreError> {
        Ok(inputs
            .iter()
            .map(|t| {
                let k = t.iter().filter(|s| s.as_str() == "x").count() as f64;
                let p = 1.0 - 1.0 / (2.0 + k);
                vec![1.0 - p, p]
            })
            .collect())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn s1_rows_are_sparse_unit_and_finite(c in corpus(12), k in 1usize..6) {
        let rep = build_s1_vocab(&c, &vocab(), k).unwrap();
        prop_assert_eq!(rep.len(), c.len());
        let ids: BTreeSet<&String> = rep.row_ids.iter().collect();
        prop_assert_eq!(ids.len(), rep.len());
        for row in &rep.rows {
            prop_assert!(row.nnz() <= k);
            prop_assert!(row.entries().all(|(_, v)| v.is_finite()));
            if !row.is_zero() {
                prop_assert!((row.norm_sq().sqrt() - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn s2_is_scale_invariant(c in corpus(6), scale in 0.1..10.0f64) {
        let v = vocab();
        let rows: Vec<(String, Vec<f64>)> = WORDS.iter().enumerate().map(|(i, w)| (w.to_string(), vec![i as f64 + 1.0, (i % 3) as f64 - 1.0, 0.5])).collect();
        let (emb, _) = EmbeddingTable::align(&v, &rows, true).unwrap();
        let a = build_s2_emb(&c, &v, &emb, 3).unwrap();
        let scaled: Vec<Example> = c.examples().iter().map(|e| { let mut e = e.clone(); e.salience.iter_mut().for_each(|s| *s *= scale); e }).collect();
        let b = build_s2_emb(&Corpus::new("s", scaled).unwrap(), &v, &emb, 3).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            for (p, q) in x.to_dense(3).iter().zip(y.to_dense(3)) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn smoothed_pmi_is_finite(c in corpus(16)) {
        prop_assume!(c.examples().iter().any(|e| e.predicted_label == Some(0)) && c.examples().iter().any(|e| e.predicted_label == Some(1)));
        let v = Vocabulary::from_corpus::<&str>(&c, &[], &[]);
        prop_assume!(v.is_ok());
        let v = v.unwrap();
        let pmi = compute_pmi(&c, &v, 2, Smoothing::AddAlpha(0.5)).unwrap();
        for j in 0..v.len() {
            for cl in 0..2 {
                prop_assert!(pmi.get(j, cl).is_finite());
            }
        }
        let b1 = build_b1_pmi(&c, &v, &pmi).unwrap();
        prop_assert!(b1.rows.iter().all(|r| r.entries().all(|(_, x)| x.is_finite())));
    }

    #[test]
    fn kmeans_invariants(pts in points(40, 3), k in 1usize..5, seed in 0u64..1000) {
        prop_assume!(k <= pts.len());
        let r = kmeans(&dense(&pts), &KMeansParams::new(k, seed)).unwrap();
        let total: f64 = r.per_cluster.iter().map(|c| c.size_fraction).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        let mut inertia = 0.0;
        for (i, &a) in r.assignments.iter().enumerate() {
            let d = sqd(&pts[i], &r.centroids[a]);
            inertia += d;
            prop_assert!(r.centroids.iter().all(|c| sqd(&pts[i], c) >= d - 1e-9));
        }
        prop_assert!((inertia - r.inertia).abs() <= 1e-6 * inertia.max(1e-12));
        let again = kmeans(&dense(&pts), &KMeansParams::new(k, seed)).unwrap();
        prop_assert_eq!(again, r);
    }

    #[test]
    fn cluster_metrics_are_consistent(pts in points(30, 2), tags in prop::collection::vec(any::<bool>(), 30), k in 1usize..4) {
        prop_assume!(k <= pts.len() && tags[..pts.len()].iter().any(|t| *t));
        let exs: Vec<Example> = (0..pts.len()).map(|i| {
            let e = Example::raw(&format!("p{i}"), &[], 0);
            if tags[i] { e.with_tag("t") } else { e }
        }).collect();
        let c = Corpus::new("m", exs).unwrap();
        let r = cluster_metrics(&kmeans(&dense(&pts), &KMeansParams::new(k, 0)).unwrap(), &c, "t").unwrap();
        let tagged: usize = r.per_cluster.iter().map(|s| s.tagged.unwrap()).sum();
        prop_assert_eq!(tagged, tags[..pts.len()].iter().filter(|t| **t).count());
        let recall: f64 = r.per_cluster.iter().map(|s| s.recall.unwrap()).sum();
        prop_assert!((recall - 1.0).abs() <= 1e-9);
        for s in &r.per_cluster {
            prop_assert!((s.precision.unwrap() - s.tagged.unwrap() as f64 / s.size as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn neighbor_invariants(pts in points(40, 3), labels in prop::collection::vec(0usize..2, 40), q in 0usize..40, n in 1usize..10, same in any::<bool>()) {
        let q = q % pts.len();
        let exs: Vec<Example> = (0..pts.len()).map(|i| {
            let mut e = Example::annotated(&format!("p{i}"), &[], labels[i], if labels[i] == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }, vec![]);
            e.gold_label = labels[(i + 1) % 40];
            e
        }).collect();
        let c = Corpus::new("n", exs).unwrap();
        let constraint = NeighborConstraint { same_label_as_query_prediction: same, scope: None };
        let list = nearest_neighbors(&dense(&pts), &c, &Query::Id(format!("p{q}")), n, &constraint).unwrap();
        prop_assert!(list.neighbors.windows(2).all(|w| w[0].distance <= w[1].distance));
        let qid = format!("p{q}");
        prop_assert!(list.neighbors.iter().all(|nb| nb.id != qid));
        if same {
            let want = c.examples()[q].predicted_label;
            prop_assert!(list.neighbors.iter().all(|nb| Some(c.get(&nb.id).unwrap().gold_label) == want));
        }
        prop_assert!(list.neighbors.len() <= n);
    }

    #[test]
    fn word_cloud_is_ranked_and_filtered(c in corpus(10)) {
        let toks: Vec<String> = WORDS.iter().map(|s| s.to_string()).collect();
        let v = Vocabulary::from_tokens(toks, &["a"], &["b"]).unwrap();
        let rep = build_s1_vocab(&c, &v, 4).unwrap();
        let all: Vec<usize> = (0..rep.len()).collect();
        let w = word_cloud(&rep, &all, &v, TermFilter::default(), "all").unwrap();
        prop_assert!(w.terms.windows(2).all(|p| p[0].weight >= p[1].weight));
        prop_assert!(w.terms.iter().all(|t| t.token != "a" && t.token != "b"));
        let unfiltered = word_cloud(&rep, &all, &v, TermFilter::NONE, "all").unwrap();
        let kept: Vec<_> = unfiltered.terms.iter().filter(|t| t.token != "a" && t.token != "b").cloned().collect();
        prop_assert_eq!(kept, w.terms);
    }

    #[test]
    fn min_count_above_everything_empties_seed_list(c in corpus(10)) {
        let rep = build_s1_vocab(&c, &vocab(), 4).unwrap();
        let counts = c.token_counts();
        let top = counts.values().copied().max().unwrap_or(0);
        let (list, short) = aggregate_salient_terms(&rep, &counts, 3, top + 1, &vocab(), TermFilter::NONE).unwrap();
        prop_assert!(list.terms.is_empty() && short);
    }

    #[test]
    fn insertion_adds_one_token_in_order(toks in prop::collection::vec(0..WORDS.len(), 0..10), seed in any::<u64>()) {
        let tokens: Vec<&str> = toks.iter().map(|&t| WORDS[t]).collect();
        let e = Example::raw("x", &tokens, 0);
        let out = insert_term(&e, "zz", &mut rng::seeded(seed));
        prop_assert_eq!(out.tokens.len(), tokens.len() + 1);
        let pos = out.tokens.iter().position(|t| t == "zz").unwrap();
        let mut rest = out.tokens.clone();
        rest.remove(pos);
        prop_assert_eq!(rest, e.tokens.clone());
        prop_assert_eq!(insert_term(&e, "zz", &mut rng::seeded(seed)), out);
    }

    #[test]
    fn masking_is_idempotent(toks in prop::collection::vec(0..WORDS.len(), 0..10), term in 0..WORDS.len()) {
        let tokens: Vec<&str> = toks.iter().map(|&t| WORDS[t]).collect();
        let e = Example::raw("x", &tokens, 0);
        let (once, n) = mask_term(&e, WORDS[term], MASK_TOKEN);
        prop_assert_eq!(n, toks.iter().filter(|&&t| t == term).count());
        let (twice, m) = mask_term(&once, WORDS[term], MASK_TOKEN);
        prop_assert_eq!(m, 0);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn sensitivity_identity_and_bounds(c in corpus(20), m in 1usize..6, seed in any::<u64>()) {
        let zero = slice(&c, &Selector { gold_label: Some(0), ..Selector::default() }).unwrap();
        prop_assume!(zero.len() >= m);
        let seeds = SeedList::manual("s", &["x", "a", "q"]);
        let r = counterfactual_change(&CountScorer, &zero, &seeds, &SensitivityConfig::new(1, m, seed)).unwrap();
        let all: Vec<f64> = r.per_term.iter().flat_map(|t| t.deltas.iter().copied()).collect();
        prop_assert_eq!(all.len(), 3 * m);
        prop_assert!(all.iter().all(|d| (-1.0..=1.0).contains(d)));
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        prop_assert!((r.aggregate.mean_delta - mean).abs() <= 1e-9);
        let of_means = r.per_term.iter().map(|t| t.mean_delta).sum::<f64>() / 3.0;
        prop_assert!((r.aggregate.mean_delta - of_means).abs() <= 1e-9);
        // Only "x" moves the scorer, and always upward.
        prop_assert!(r.per_term[0].deltas.iter().all(|d| *d > 0.0));
        prop_assert!(r.per_term[1].deltas.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn masking_excludes_absent_terms(c in corpus(12)) {
        let one = slice(&c, &Selector { gold_label: Some(1), ..Selector::default() }).unwrap();
        prop_assume!(!one.is_empty());
        let seeds = SeedList::manual("s", &["a", "zz"]);
        let r = masking_change(&CountScorer, &one, &seeds, &SensitivityConfig::new(1, 1, 0)).unwrap();
        prop_assert!(r.absent_terms.contains(&"zz".to_string()));
        prop_assert!(r.per_term.iter().all(|t| t.deltas.iter().all(|d| *d == 0.0)));
        prop_assert!(r.aggregate.mean_delta == 0.0);
    }
}
