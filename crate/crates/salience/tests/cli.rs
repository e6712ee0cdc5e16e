use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salience")).args(args).output().unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/two.jsonl")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_overrides() {
    let o = bin(&["cluster", "--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in ["--config", "--k", "--clusters", "--seed", "--perplexity", "--tag", "--rep"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn missing_input_names_the_path() {
    let o = bin(&["represent", "--examples", "/definitely/not/here.jsonl"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/definitely/not/here.jsonl"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[rep]\nkind = \"s1\"\nbogus = 1\n").unwrap();
    let o = bin(&["represent", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(bin(&["represent"]).status.code(), Some(2));
    assert_eq!(bin(&["represent", "--rep", "b9"]).status.code(), Some(2));
    let o = bin(&["represent", "--examples", s(&fixture()), "--k", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = bin(&["sensitivity", "--examples", s(&fixture()), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn data_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let o = bin(&["neighbors", "--examples", s(&fixture()), "--out-dir", out, "--id", "nope"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"x\",\"tokens\":[\"a\"],\"label\":0,\"pred\":0,\"salience\":[1,2]}\n").unwrap();
    let o = bin(&["represent", "--examples", s(&bad), "--out-dir", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
    let o = bin(&["cluster", "--examples", s(&fixture()), "--out-dir", out, "--clusters", "5"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn represent_and_project_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert!(bin(&["represent", "--examples", s(&fixture()), "--out-dir", out, "--k", "2"]).status.success());
    let rep = salience::io::load_rep(&dir.path().join("rep_s1.jsonl")).unwrap();
    assert_eq!(rep.row_ids, ["r1", "r0"]);
    assert!(rep.rows.iter().all(|r| r.nnz() <= 2));
    let o = bin(&["project", "--examples", s(&fixture()), "--out-dir", out, "--clusters", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("perplexity reduced"));
    let vectors = std::fs::read_to_string(dir.path().join("vectors.tsv")).unwrap();
    assert_eq!(vectors.lines().count(), 2);
    assert!(vectors.lines().all(|l| l.split('\t').count() == 2));
    let meta = std::fs::read_to_string(dir.path().join("metadata.tsv")).unwrap();
    assert_eq!(meta.lines().next(), Some("id\tpred\tgold\tcluster\ttags"));
    assert!(meta.lines().nth(2).unwrap().starts_with("r0\t1\t1\t"));
}

#[test]
fn synthetic_session_reproduces_the_shortcut_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = bin(&["synth", "--out-dir", s(&run)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let session = run.join("session.toml");
    let o = bin(&["cluster", "--config", s(&session)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = String::from_utf8_lossy(&o.stdout).lines().next().unwrap().to_string();
    assert!(line.contains("precision 1.000 recall 1.000"), "{line}");
    let report: serde_json::Value = salience::io::load_json(&run.join("clusters_s1.json")).unwrap();
    let best = report["best_precision_cluster"].as_u64().unwrap() as usize;
    let terms: Vec<&str> =
        report["per_cluster"][best]["top_terms"]["terms"].as_array().unwrap().iter().take(2).map(|t| t["token"].as_str().unwrap()).collect();
    assert!(terms.contains(&"class_0") && terms.contains(&"common"), "{terms:?}");
}
