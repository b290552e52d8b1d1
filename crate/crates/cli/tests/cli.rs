use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use srf::synthetic::toy_collection;
use srf::trec::{format_qrels, read_trec_run};

fn srf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srf")).current_dir(dir).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_small_collection(dir: &Path) {
    fs::write(
        dir.join("corpus.tsv"),
        "d1\tapple banana apple\nd2\tbanana cherry\nd3\tcherry durian fig\nd4\tapple fig fig\n",
    )
    .unwrap();
    fs::write(dir.join("queries.tsv"), "q1\tapple\nq2\tcherry fig\n").unwrap();
}

#[test]
fn missing_input_fails_with_one_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = srf(dir.path(), &["index", "--corpus", "nope.tsv", "--out", "idx"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[io]: "), "{err}");
}

#[test]
fn malformed_corpus_reports_parse_kind() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.tsv"), "no tab here\n").unwrap();
    let out = srf(dir.path(), &["index", "--corpus", "bad.tsv", "--out", "idx"]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error[parse]: "), "{}", stderr(&out));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_small_collection(dir.path());
    fs::write(dir.path().join("c.toml"), "[retrieval]\nkk = 3\n").unwrap();
    let out = srf(dir.path(), &["--config", "c.toml", "index", "--corpus", "corpus.tsv", "--out", "idx"]);
    assert!(!out.status.success());
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_small_collection(d);
    fs::write(d.join("c.toml"), "[retrieval]\nk = 1\n").unwrap();
    assert!(srf(d, &["index", "--corpus", "corpus.tsv", "--out", "idx"]).status.success());
    let base = ["--config", "c.toml", "search", "--index", "idx", "--queries", "queries.tsv"];
    assert!(srf(d, &[&base[..], &["--out", "a.run"]].concat()).status.success());
    assert!(srf(d, &[&base[..], &["--out", "b.run", "--k", "3"]].concat()).status.success());
    let a = read_trec_run(d.join("a.run")).unwrap();
    let b = read_trec_run(d.join("b.run")).unwrap();
    assert!(a.values().all(|l| l.len() == 1));
    assert_eq!(b["q2"].len(), 3);
}

#[test]
fn unknown_retrieval_model_is_an_invalid_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_small_collection(d);
    assert!(srf(d, &["index", "--corpus", "corpus.tsv", "--out", "idx"]).status.success());
    let out = srf(d, &["search", "--index", "idx", "--queries", "queries.tsv", "--out", "r", "--retrieval", "tfidf"]);
    assert!(stderr(&out).starts_with("error[invalid_parameter]: "), "{}", stderr(&out));
}

#[test]
fn bundled_toy_data_matches_generator() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy");
    let toy = toy_collection(20, 25, 3, 2024);
    let corpus = srf::tsv::format_corpus(toy.docs.iter().map(|(a, b)| (a.as_str(), b.as_str())));
    assert_eq!(fs::read_to_string(root.join("corpus.tsv")).unwrap(), corpus);
    assert_eq!(fs::read_to_string(root.join("queries.tsv")).unwrap(), srf::tsv::format_queries(&toy.queries));
    assert_eq!(fs::read_to_string(root.join("qrels.txt")).unwrap(), format_qrels(&toy.qrels));
}
