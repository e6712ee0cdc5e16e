use std::path::{Path, PathBuf};

use proptest::prelude::*;

use salience::io::{self, IoError, LoadOptions};
use salience_core::corpus::{Corpus, Example, Vocabulary};
use salience_core::represent::{build_b2_avg_emb, build_s1_vocab, RepKind, RepMatrix, Row};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn parse(text: &str) -> Result<Corpus, IoError> {
    io::parse_examples(Path::new("mem.jsonl"), text, LoadOptions::default())
}

#[test]
fn fixture_file_loads_in_order() {
    let c = io::load_examples(&data("two.jsonl"), LoadOptions::default()).unwrap();
    let ids: Vec<&str> = c.examples().iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ["r1", "r0"]);
    let r1 = c.get("r1").unwrap();
    assert_eq!(r1.tokens, ["a", "gripping", "4", "/", "10"]);
    assert_eq!(r1.salience, [0.1, -0.5, 0.9, 0.2, 0.3]);
    assert_eq!(r1.probs, [0.75, 0.25]);
    assert!(c.get("r0").unwrap().has_tag("short"));
    assert_eq!(io::examples_to_string(&c), std::fs::read_to_string(data("two.jsonl")).unwrap());
}

#[test]
fn empty_input_is_an_empty_corpus() {
    assert!(parse("").unwrap().is_empty());
}

#[test]
fn invariant_errors_name_line_and_field() {
    let e = parse(r#"{"id":"x","tokens":["a","b","c"],"label":0,"pred":0,"salience":[1,2]}"#).unwrap_err();
    assert_eq!(e.line(), Some(1));
    assert_eq!(e.field(), Some("salience"));
    assert!(e.to_string().contains("salience length mismatch at line 1"), "{e}");
    let e = parse("{\"id\":\"x\",\"tokens\":[],\"label\":0}\n{\"id\":\"x\",\"tokens\":[],\"label\":1}\n").unwrap_err();
    assert_eq!(e.line(), Some(2));
    let e = parse("{\"id\":\"x\",\"tokens\":[],\"label\":0}\nnot json\n").unwrap_err();
    assert!(matches!(e, IoError::Parse { line: 2, .. }));
    let e = parse(r#"{"id":"x","tokens":["a"],"label":0,"pred":1,"probs":[0.9,0.1],"salience":[1]}"#).unwrap_err();
    assert!(e.field().is_some());
    let e = parse(r#"{"id":"x","tokens":["a"],"label":0,"pred":0,"probs":[0.5,0.4],"salience":[1]}"#).unwrap_err();
    assert!(e.field().is_some());
    let e = parse(r#"{"id":"x","tokens":[],"label":0,"typo":1}"#).unwrap_err();
    assert!(matches!(e, IoError::Parse { line: 1, .. }));
}

#[test]
fn missing_file_names_the_path() {
    let e = io::load_examples(Path::new("/no/such/file.jsonl"), LoadOptions::default()).unwrap_err();
    assert!(e.to_string().contains("/no/such/file.jsonl"));
}

#[test]
fn embeddings_align_and_report_missing() {
    let c = io::load_examples(&data("two.jsonl"), LoadOptions::default()).unwrap();
    let v = Vocabulary::from_corpus::<&str>(&c, &[], &[]).unwrap();
    let (emb, missing) = io::load_embeddings(&data("emb.tsv"), &v, false).unwrap();
    assert_eq!(missing, ["/", "10", "lovely", "."]);
    assert_eq!(emb.row(v.get("gripping").unwrap()), [0.0, 1.0, 0.0]);
    assert_eq!(emb.row(v.get("lovely").unwrap()), [0.0, 0.0, 0.0]);
    assert!(io::load_embeddings(&data("emb.tsv"), &v, true).is_err());
    let e = io::parse_embedding_rows(Path::new("e.tsv"), "a\t1\t2\nb\t1\n").map(|rows| {
        salience_core::corpus::EmbeddingTable::align(&Vocabulary::from_tokens::<&str>(vec!["a".into(), "b".into()], &[], &[]).unwrap(), &rows, true)
    });
    assert!(e.unwrap().is_err());
}

#[test]
fn rep_files_round_trip_and_validate() {
    let c = io::load_examples(&data("two.jsonl"), LoadOptions::default()).unwrap();
    let v = Vocabulary::from_corpus::<&str>(&c, &[], &[]).unwrap();
    let s1 = build_s1_vocab(&c, &v, 3).unwrap();
    let text = io::rep_to_string(&s1);
    assert_eq!(io::parse_rep(Path::new("r"), &text).unwrap(), s1);
    let (emb, _) = io::load_embeddings(&data("emb.tsv"), &v, false).unwrap();
    let b2 = build_b2_avg_emb(&c, &v, &emb, false).unwrap();
    assert_eq!(io::parse_rep(Path::new("r"), &io::rep_to_string(&b2)).unwrap(), b2);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    assert!(io::parse_rep(Path::new("r"), &lines.join("\n")).is_err());
}

fn arb_f64() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3..1e3f64, Just(0.0), Just(-0.0)]
}

prop_compose! {
    fn arb_example(i: usize)(
        toks in prop::collection::vec("[a-z\\.\"\\\\é]{1,5}", 0..6),
        sal in prop::collection::vec(arb_f64(), 6),
        p in 0.0..1.0f64,
        gold in 0usize..2,
        tags in prop::collection::btree_set("[a-z]{1,4}", 0..3),
        enc in prop::collection::vec(arb_f64(), 3),
    ) -> Example {
        let (probs, pred) = if p >= 0.5 { (vec![1.0 - p, p], 1) } else { (vec![1.0 - p, p], 0) };
        let mut e = Example::raw(&format!("id-{i}"), &[], gold);
        e.tokens = toks.clone();
        e.predicted_label = Some(pred);
        e.probs = probs;
        e.salience = sal[..toks.len()].to_vec();
        e.encoding = Some(enc);
        e.tags = tags;
        e
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_round_trip_is_exact(exs in (1usize..6).prop_flat_map(|n| (0..n).map(arb_example).collect::<Vec<_>>())) {
        prop_assume!(exs.iter().all(|e| e.validate().is_ok()));
        let c = Corpus::new("rt", exs).unwrap();
        let text = io::examples_to_string(&c);
        let back = io::parse_examples(Path::new("rt.jsonl"), &text, LoadOptions::default()).unwrap();
        prop_assert_eq!(back.examples(), c.examples());
        prop_assert_eq!(io::examples_to_string(&back), text);
    }

    #[test]
    fn rep_round_trip_is_exact(rows in prop::collection::vec(prop::collection::vec(arb_f64(), 4), 1..6), sparse in any::<bool>()) {
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let rows: Vec<Row> = rows.into_iter().map(|v| if sparse {
            Row::sparse(v.into_iter().enumerate().filter(|(_, x)| *x != 0.0).map(|(j, x)| (j as u32, x)).collect())
        } else {
            Row::Dense(v)
        }).collect();
        let kind = if sparse { RepKind::S1Vocab } else { RepKind::B3Cls };
        let rep = RepMatrix::new(kind, 4, sparse.then_some(4), false, ids, rows);
        prop_assert_eq!(io::parse_rep(Path::new("r"), &io::rep_to_string(&rep)).unwrap(), rep);
    }

    #[test]
    fn sig6_keeps_six_significant_digits(x in arb_f64()) {
        let back: f64 = io::sig6(x).parse().unwrap();
        if x == 0.0 {
            prop_assert_eq!(back, 0.0);
        } else {
            prop_assert!(((back - x) / x).abs() <= 5e-6, "{} -> {}", x, io::sig6(x));
        }
    }
}
