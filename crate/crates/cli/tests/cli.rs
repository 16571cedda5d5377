use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_wikilink");

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

fn wikilink(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("WIKILINK_THREADS").output().unwrap()
}

fn sandbox() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in ["nodes.tsv", "train.csv", "test.csv", "pipeline.toml"] {
        fs::copy(fixture_dir().join(name), dir.path().join(name)).unwrap();
    }
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = wikilink(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bundled_fixture_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    assert!(wikilink(&["synth", "--output-dir", s(dir.path())]).status.success());
    for name in ["nodes.tsv", "train.csv", "test.csv", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(fixture_dir().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn stats_on_fixture() {
    let out = wikilink(&["stats", "--pairs", s(&fixture_dir().join("train.csv"))]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(fixture_dir().join("manifest.json")).unwrap()).unwrap();
    let line = stdout.lines().find_map(|l| l.strip_prefix("stats ")).unwrap();
    let stats: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(stats["count_0"], manifest["count_0"]);
    assert_eq!(stats["count_1"], manifest["count_1"]);
}

#[test]
fn stats_reads_config_paths() {
    let dir = sandbox();
    let out = wikilink(&["--config", s(&dir.path().join("pipeline.toml")), "stats"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn clean_stdin_to_stdout_with_report() {
    let mut child = Command::new(BIN)
        .args(["clean", "--report"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"1\tIntro {{Infobox | x=1}} text,  here.\n2\t{{a}}\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(out.stdout, b"1\tIntro text here\n2\t\n");
    let stderr = String::from_utf8(out.stderr).unwrap();
    let report = stderr.lines().find_map(|l| l.strip_prefix("clean_report ")).unwrap();
    let report: serde_json::Value = serde_json::from_str(report).unwrap();
    assert_eq!(report["documents"], 2);
    assert_eq!(report["output_length"], 15);
}

#[test]
fn clean_stage_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsv");
    let output = dir.path().join("out.tsv");
    fs::write(&input, "1\ta, {{b}}  c\n").unwrap();
    let run = |flags: &[&str]| {
        let mut args = vec!["clean", "--input", s(&input), "--output", s(&output)];
        args.extend_from_slice(flags);
        assert!(wikilink(&args).status.success());
        fs::read_to_string(&output).unwrap()
    };
    assert_eq!(run(&[]), "1\ta c\n");
    assert_eq!(run(&["--no-debrace"]), "1\ta {{b}} c\n");
    assert_eq!(run(&["--no-depunct"]), "1\ta, c\n");
    assert_eq!(run(&["--no-despace"]), "1\ta   c\n");
}

#[test]
fn step_by_step_matches_pipeline() {
    let dir = sandbox();
    let p = dir.path();
    let cfg = p.join("pipeline.toml");
    assert!(wikilink(&["--config", s(&cfg), "pipeline"]).status.success());

    let model = p.join("step/model.json");
    let preds = p.join("step/predictions.csv");
    let sub = p.join("step/submission.csv");
    let prepared = p.join("step/train.prepared.tsv");
    assert!(wikilink(&["--config", s(&cfg), "prepare", "--output", s(&prepared)]).status.success());
    assert!(wikilink(&["--config", s(&cfg), "train", "--model", s(&model)]).status.success());
    assert!(wikilink(&["--config", s(&cfg), "predict", "--model", s(&model), "--output", s(&preds)])
        .status
        .success());
    assert!(wikilink(&["submit", "--predictions", s(&preds), "--output", s(&sub)]).status.success());

    for (a, b) in [
        ("out/model.json", "step/model.json"),
        ("out/predictions.csv", "step/predictions.csv"),
        ("out/submission.csv", "step/submission.csv"),
        ("out/train.prepared.tsv", "step/train.prepared.tsv"),
    ] {
        assert_eq!(fs::read(p.join(a)).unwrap(), fs::read(p.join(b)).unwrap(), "{a}");
    }

    let out = wikilink(&["eval", "--predictions", s(&sub), "--gold", s(&p.join("train.csv"))]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("macro_f1"));
}

#[test]
fn flags_override_config_file() {
    let dir = sandbox();
    let cfg = dir.path().join("pipeline.toml");
    let model = dir.path().join("m.json");
    assert!(wikilink(&["--config", s(&cfg), "train", "--model", s(&model), "--epochs", "1", "--batch-size", "50"])
        .status
        .success());
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&model).unwrap()).unwrap();
    assert_eq!(json["config"]["epochs"], 1);
    assert_eq!(json["config"]["batch_size"], 50);
    assert_eq!(json["step"], 4);
}

#[test]
fn thread_env_is_read() {
    let dir = sandbox();
    let out = Command::new(BIN)
        .args(["--config", s(&dir.path().join("pipeline.toml")), "stats"])
        .env("WIKILINK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn hermetic_run_touches_only_named_files() {
    let dir = sandbox();
    let before: Vec<_> = ["nodes.tsv", "train.csv", "test.csv"]
        .iter()
        .map(|n| fs::read(dir.path().join(n)).unwrap())
        .collect();
    let out = wikilink(&["--config", s(&dir.path().join("pipeline.toml")), "pipeline"]);
    assert!(out.status.success());
    let mut top: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    top.sort();
    assert_eq!(top, ["nodes.tsv", "out", "pipeline.toml", "test.csv", "train.csv"]);
    let mut outputs: Vec<String> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    outputs.sort();
    assert_eq!(
        outputs,
        ["model.json", "nodes.clean.tsv", "predictions.csv", "submission.csv", "train.prepared.tsv"]
    );
    for (n, bytes) in ["nodes.tsv", "train.csv", "test.csv"].iter().zip(before) {
        assert_eq!(fs::read(dir.path().join(n)).unwrap(), bytes);
    }
}

#[test]
fn missing_input_is_io_error() {
    let dir = sandbox();
    fs::remove_file(dir.path().join("test.csv")).unwrap();
    let out = wikilink(&["--config", s(&dir.path().join("pipeline.toml")), "pipeline"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn parse_error_exit_code() {
    let dir = sandbox();
    fs::write(dir.path().join("nodes.tsv"), "x\tbroken\n").unwrap();
    let out = wikilink(&["--config", s(&dir.path().join("pipeline.toml")), "pipeline"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn strict_join_fails_lenient_skips() {
    let dir = sandbox();
    let cfg = dir.path().join("pipeline.toml");
    let mut train = fs::read_to_string(dir.path().join("train.csv")).unwrap();
    train.push_str("extra,1000,99999,1\n");
    fs::write(dir.path().join("train.csv"), train).unwrap();

    let out = wikilink(&["--config", s(&cfg), "pipeline"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("99999"));
    assert!(!dir.path().join("out/submission.csv").exists());

    let out = wikilink(&["--config", s(&cfg), "pipeline", "--lenient"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1 pairs"));
}

#[test]
fn labeled_test_pairs_are_scored() {
    let dir = sandbox();
    let p = dir.path();
    let out = wikilink(&[
        "pipeline",
        "--nodes",
        s(&p.join("nodes.tsv")),
        "--train-pairs",
        s(&p.join("train.csv")),
        "--test-pairs",
        s(&p.join("train.csv")),
        "--output-dir",
        s(&p.join("o")),
        "--threads",
        "2",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("eval {"));
}

#[test]
fn eval_coverage_error() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.csv");
    let gold = dir.path().join("g.csv");
    fs::write(&preds, "id,label\na,1\n").unwrap();
    fs::write(&gold, "id,id1,id2,label\nb,1,2,1\n").unwrap();
    let out = wikilink(&["eval", "--predictions", s(&preds), "--gold", s(&gold)]);
    assert_eq!(out.status.code(), Some(4));
}
