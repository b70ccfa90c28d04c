use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FAMILY: &str = "\
anna\tparent_of\tben
ben\tparent_of\tcara
cara\tparent_of\tdan
anna\tspouse_of\tolaf
olaf\tparent_of\tben
ben\tsibling_of\tbea
bea\tparent_of\tcarl
carl\tsibling_of\tcara
";

fn kgwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgwalk"))
        .args(args)
        .env("RUST_LOG", "error")
        .env_remove("KGWALK_OUT_DIR")
        .output()
        .expect("run kgwalk")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn family(dir: &Path) -> PathBuf {
    let path = dir.join("family.tsv");
    fs::write(&path, FAMILY).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_ratio_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let graph = family(dir.path());
    let out = kgwalk(&[
        "split",
        "--in",
        s(&graph),
        "--node-ratio",
        "1.5",
        "--out",
        s(&dir.path().join("split")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--node-ratio must lie in [0, 1], got 1.5"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_exits_one_and_help_exits_zero() {
    assert_eq!(code(&kgwalk(&["split", "--bogus"])), 1);
    assert_eq!(code(&kgwalk(&["--help"])), 0);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgwalk(&[
        "split",
        "--in",
        s(&dir.path().join("absent.tsv")),
        "--out",
        s(&dir.path().join("split")),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn split_writes_manifest_and_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let graph = family(dir.path());
    let a = dir.path().join("a");
    let out = kgwalk(&["split", "--in", s(&graph), "--node-ratio", "0.25", "--seed", "7", "--out", s(&a)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["rich.tsv", "sparse.tsv", "masked_entities.txt", "split_report.txt", "manifest.toml"] {
        assert!(a.join(name).exists(), "{name}");
    }
    let masked = fs::read_to_string(a.join("masked_entities.txt")).unwrap();
    assert_eq!(masked.lines().count(), 1);

    let b = dir.path().join("b");
    let out = kgwalk(&["split", "--config", s(&a.join("manifest.toml")), "--out", s(&b)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["rich.tsv", "sparse.tsv", "masked_entities.txt", "masked_triples.tsv", "split_report.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn pipeline_runs_end_to_end_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let graph = family(dir.path());
    let shaper = dir.path().join("shaper");
    let out = kgwalk(&[
        "train-shaper",
        "--graph",
        s(&graph),
        "--dim",
        "8",
        "--epochs",
        "20",
        "--out",
        s(&shaper),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let agent = dir.path().join("agent");
    let ckpt = format!("ckpt:{}", s(&shaper.join("shaper.json")));
    let train = |out_dir: &Path, epochs: &str, resume: Option<&Path>| {
        let mut args = vec![
            "train-agent",
            "--graph",
            s(&graph),
            "--shaper",
            &ckpt,
            "--epochs",
            epochs,
            "--batch-size",
            "8",
            "--entity-dim",
            "4",
            "--hidden-dim",
            "8",
            "--eval-every",
            "0",
            "--out",
            s(out_dir),
        ];
        if let Some(path) = resume {
            args.extend(["--resume", s(path)]);
        }
        kgwalk(&args)
    };
    let out = train(&agent, "4", None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let log = fs::read_to_string(agent.join("train.log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch=")).count(), 4);

    let eval = dir.path().join("eval");
    let out = kgwalk(&[
        "eval",
        "--agent",
        s(&agent.join("agent.json")),
        "--graph",
        s(&graph),
        "--test",
        s(&graph),
        "--out",
        s(&eval),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(eval.join("report.kv")).unwrap();
    assert!(report.contains("hits1="), "{report}");
    assert!(report.contains("n=8"), "{report}");
    let ranks = fs::read_to_string(eval.join("ranks.tsv")).unwrap();
    assert_eq!(ranks.lines().count(), 8);

    // two epochs, then two more from the last checkpoint, matches four straight
    let part = dir.path().join("part");
    assert_eq!(code(&train(&part, "2", None)), 0);
    let resumed = dir.path().join("resumed");
    let out = train(&resumed, "4", Some(&part.join("agent_last.json")));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(agent.join("agent_last.json")).unwrap(),
        fs::read(resumed.join("agent_last.json")).unwrap()
    );
}

#[test]
fn shaper_from_another_vocabulary_is_incompatible() {
    let dir = tempfile::tempdir().unwrap();
    let graph = family(dir.path());
    let other = dir.path().join("other.tsv");
    fs::write(&other, "x\tr\ty\ny\tr\tz\n").unwrap();
    let shaper = dir.path().join("shaper");
    let out = kgwalk(&["train-shaper", "--graph", s(&other), "--dim", "4", "--epochs", "1", "--out", s(&shaper)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let ckpt = format!("ckpt:{}", s(&shaper.join("shaper.json")));
    let out = kgwalk(&[
        "train-agent",
        "--graph",
        s(&graph),
        "--shaper",
        &ckpt,
        "--epochs",
        "1",
        "--out",
        s(&dir.path().join("agent")),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn missing_agent_checkpoint_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let graph = family(dir.path());
    let out = kgwalk(&[
        "eval",
        "--agent",
        s(&dir.path().join("nope.json")),
        "--graph",
        s(&graph),
        "--test",
        s(&graph),
        "--out",
        s(&dir.path().join("eval")),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}
