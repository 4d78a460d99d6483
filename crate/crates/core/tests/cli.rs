mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(pairs: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().display();
        common::write_raw(&common::bengali_raw_dump(pairs, 21), &dir.path().join("raw.jsonl"));
        std::fs::write(
            dir.path().join("run.conf"),
            format!(
                "raw_path = {d}/raw.jsonl\n\
                 dataset_path = {d}/dataset.jsonl\n\
                 train_path = {d}/train.jsonl\n\
                 val_path = {d}/val.jsonl\n\
                 test_path = {d}/test.jsonl\n\
                 vocab_path = {d}/vocab.txt\n\
                 checkpoint_dir = {d}/ckpt\n\
                 report_path = {d}/report.tsv\n\
                 input_path = {d}/input.txt\n\
                 vocab_size = 60\n\
                 embed_dim = 8\n\
                 hidden_dim = 8\n\
                 batch_size = 4\n\
                 steps_per_checkpoint = 350\n\
                 max_steps = 700\n"
            ),
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_bansum"))
            .args(args)
            .arg("--config")
            .arg(self.path("run.conf"))
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn prepare_through_vocab(&self) {
        for cmd in ["prepare", "split", "build-vocab"] {
            self.ok(&[cmd]);
        }
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn checkpoints(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".bans"))
        .collect();
    names.sort();
    names
}

#[test]
fn stats_prints_aligned_table() {
    let ws = Workspace::new(30);
    ws.ok(&["prepare"]);
    let out = ws.ok(&["stats"]);
    assert!(out.lines().count() >= 5, "{out}");
    assert!(out.lines().next().unwrap().ends_with(" 30"), "{out}");
}

#[test]
fn data_commands_are_idempotent() {
    let ws = Workspace::new(60);
    ws.prepare_through_vocab();
    let files = ["dataset.jsonl", "train.jsonl", "val.jsonl", "test.jsonl", "vocab.txt"];
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(ws.path(f)).unwrap()).collect();
    ws.prepare_through_vocab();
    for (f, bytes) in files.iter().zip(first) {
        assert_eq!(std::fs::read(ws.path(f)).unwrap(), bytes, "{f} changed on rerun");
    }
    let split = ws.ok(&["split"]);
    assert_eq!(split.trim(), "train 42 val 12 test 6");
}

#[test]
fn train_summarize_evaluate() {
    let ws = Workspace::new(40);
    ws.prepare_through_vocab();
    ws.ok(&["train"]);
    assert_eq!(
        checkpoints(&ws.path("ckpt")),
        ["checkpoint-00000350.bans", "checkpoint-00000700.bans"]
    );
    let log = std::fs::read_to_string(ws.path("ckpt/train_log.tsv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    std::fs::write(ws.path("input.txt"), "ঢাকা সরকার নতুন সেতু\n\nবন্যা কৃষক ধান উৎপাদন\n").unwrap();
    let out = ws.ok(&["summarize"]);
    assert_eq!(out.lines().count(), 3, "{out:?}");
    assert_eq!(out.lines().nth(1), Some(""));
    assert_eq!(ws.ok(&["summarize"]), out);

    let line = ws.ok(&["evaluate"]);
    assert!(line.starts_with("n=4 "), "{line}");
    let report = std::fs::read_to_string(ws.path("report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 4 + 2);
    assert!(report.lines().last().unwrap().starts_with("mean\t"));

    // resume to 1050 from the explicit step-700 checkpoint
    let ckpt = ws.path("ckpt/checkpoint-00000700.bans");
    ws.ok(&[
        "train",
        "--set",
        &format!("checkpoint_path={}", ckpt.display()),
        "--set",
        "max_steps=1050",
    ]);
    assert_eq!(checkpoints(&ws.path("ckpt")).len(), 3);
    let again = ws.ok(&["evaluate", "--full-test"]);
    assert!(again.starts_with("n=4 "), "{again}");
}

#[test]
fn errors_are_distinct_and_nonzero() {
    let ws = Workspace::new(10);
    let unknown_cmd = ws.run(&["compress"]);
    let unknown_flag = ws.run(&["stats", "--verbose-ish"]);
    let unknown_key = ws.run(&["stats", "--set", "colour=blue"]);
    let bad_value = ws.run(&["stats", "--set", "hidden_dim=0"]);
    let missing = ws.run(&["stats"]);
    let no_ckpt = {
        ws.prepare_through_vocab();
        std::fs::write(ws.path("input.txt"), "ঢাকা\n").unwrap();
        ws.run(&["summarize"])
    };
    let outs = [
        &unknown_cmd,
        &unknown_flag,
        &unknown_key,
        &bad_value,
        &missing,
        &no_ckpt,
    ];
    let messages: Vec<String> = outs.iter().map(|o| stderr(o)).collect();
    for (o, m) in outs.iter().zip(&messages) {
        assert!(!o.status.success(), "{m}");
        assert_eq!(m.trim().lines().count(), 1, "{m}");
    }
    assert!(messages[0].contains("subcommand"));
    assert!(messages[1].contains("--verbose-ish"));
    assert!(messages[2].contains("unknown config key `colour`"));
    assert!(messages[3].contains("hidden_dim"));
    assert!(messages[4].contains("missing input file: `dataset_path`"));
    assert!(messages[5].contains("checkpoint"));
    let mut unique = messages.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), messages.len());
}
