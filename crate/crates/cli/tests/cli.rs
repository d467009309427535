use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/planted2")
        .join(name)
}

fn topicseed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topicseed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn preprocess(dir: &Path) -> PathBuf {
    let bundle = dir.join("bundle");
    let o = topicseed(&[
        "preprocess",
        "--corpus",
        s(&fixture("corpus.txt")),
        "--seeds",
        s(&fixture("seeds.txt")),
        "--out",
        s(&bundle),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    bundle
}

const QUICK: &[&str] = &["--iterations", "2", "--epochs", "3"];

fn run(bundle: &Path, out: &Path, extra: &[&str]) -> Output {
    let mentions = fixture("mentions.txt");
    let mut args = vec![
        "run",
        "--bundle",
        s(bundle),
        "--mentions",
        s(&mentions),
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    topicseed(&args)
}

#[test]
fn missing_seeds_file_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no-such-seeds.txt");
    let o = topicseed(&[
        "preprocess",
        "--corpus",
        s(&fixture("corpus.txt")),
        "--seeds",
        s(&missing),
        "--out",
        s(&dir.path().join("b")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no-such-seeds.txt"), "{}", stderr(&o));
}

#[test]
fn missing_required_flag_exits_2() {
    let o = topicseed(&["preprocess", "--corpus", s(&fixture("corpus.txt"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seeds"), "{}", stderr(&o));
    let o = topicseed(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundle_manifest_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = fs::read(preprocess(a.path()).join("manifest.json")).unwrap();
    let mb = fs::read(preprocess(b.path()).join("manifest.json")).unwrap();
    assert_eq!(ma, mb);
    for name in ["train.txt", "test.txt", "seeds.txt", "vocab.tsv"] {
        assert!(a.path().join("bundle").join(name).exists(), "{name}");
    }
}

#[test]
fn invalid_eta_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&dir.path().join("no-bundle"), &out, &["--eta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eta"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn zero_iterations_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &dir.path().join("no-bundle"),
        &dir.path().join("out"),
        &["--iterations", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("N must be ≥ 1"), "{}", stderr(&o));
}

#[test]
fn tampered_bundle_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = preprocess(dir.path());
    fs::write(bundle.join("train.txt"), "a00 b00 .\n").unwrap();
    let o = run(&bundle, &dir.path().join("out"), QUICK);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn end_to_end_run_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = preprocess(dir.path());
    let out = dir.path().join("run");
    let o = run(&bundle, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let topics = fs::read_to_string(out.join("topics.txt")).unwrap();
    assert_eq!(topics, fs::read_to_string(fixture("topics.golden.txt")).unwrap());
    for name in ["topics.json", "config.toml", "run.json", "checkpoints/iter_4.json"] {
        assert!(out.join(name).exists(), "{name}");
    }

    // gold lists every planted term, so all retrieved terms are correct
    let metrics = dir.path().join("metrics");
    let o = topicseed(&[
        "eval",
        "--topics",
        s(&out.join("topics.txt")),
        "--bundle",
        s(&bundle),
        "--gold",
        s(&fixture("gold.txt")),
        "--out",
        s(&metrics),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(metrics.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["summary"]["P@20"], 1.0);
    assert_eq!(m["summary"]["NDCG@20"], 1.0);
    assert!(m["summary"]["NPMI"].as_f64().unwrap() > 0.0);
    // every topic is shorter than 20, so each one warns
    assert!(stderr(&o).contains("evaluating the prefix"), "{}", stderr(&o));

    let o = topicseed(&[
        "report",
        "--topics",
        s(&out.join("topics.json")),
        "--bundle",
        s(&bundle),
        "--metrics",
        s(&metrics.join("metrics.json")),
        "--top",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[a00]") && text.contains("[b00]"), "{text}");
}

#[test]
fn empty_gold_section_names_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = preprocess(dir.path());
    let out = dir.path().join("run");
    let o = run(&bundle, &out, QUICK);
    assert!(o.status.success(), "{}", stderr(&o));
    let gold = dir.path().join("gold.txt");
    fs::write(&gold, "[a00]\na01\n[b00]\n").unwrap();
    let o = topicseed(&[
        "eval",
        "--topics",
        s(&out.join("topics.txt")),
        "--bundle",
        s(&bundle),
        "--gold",
        s(&gold),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b00"), "{}", stderr(&o));
}

#[test]
fn resumed_run_matches_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = preprocess(dir.path());
    let full = dir.path().join("full");
    let o = run(&bundle, &full, QUICK);
    assert!(o.status.success(), "{}", stderr(&o));

    let resumed = dir.path().join("resumed");
    let checkpoint = full.join("checkpoints/iter_1.json");
    let mut args = QUICK.to_vec();
    args.extend(["--resume", s(&checkpoint)]);
    let o = run(&bundle, &resumed, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(full.join("topics.txt")).unwrap(),
        fs::read_to_string(resumed.join("topics.txt")).unwrap()
    );
    assert!(!resumed.join("checkpoints/iter_1.json").exists());

    // a checkpoint from another configuration is refused
    let mut args = QUICK.to_vec();
    args.extend(["--resume", s(&checkpoint), "--alpha", "0.5"]);
    let o = run(&bundle, &dir.path().join("other"), &args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("different configuration"), "{}", stderr(&o));
}
