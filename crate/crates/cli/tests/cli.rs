use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HYPER: &str = r#"{"logit": {"max_epochs": 15}, "gbdt": {"n_trees": 6, "max_depth": 3}}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ipa-ppm"))
}

fn run(args: &[&str]) -> Output {
    run_with_threads(args, None)
}

fn run_with_threads(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        let w = Workspace { dir: tempfile::tempdir().unwrap() };
        fs::write(w.path("hyper.json"), HYPER).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn simulate(&self, name: &str, cases: u32) -> PathBuf {
        let out = self.path(name);
        ok(&["simulate", "--seed", "5", "--cases", &cases.to_string(), "--out", s(&out)]);
        out
    }

    fn model(&self, log: &Path, task: &str, regime: &str, learner: &str) -> PathBuf {
        let data = self.path(&format!("{task}-{regime}.csv"));
        let model = self.path(&format!("{task}-{regime}-{learner}.json"));
        ok(&["featurize", "--in", s(log), "--task", task, "--regime", regime, "--out", s(&data)]);
        let hyper = self.path("hyper.json");
        ok(&["train", "--data", s(&data), "--learner", learner, "--hyper", s(&hyper), "--out", s(&model)]);
        model
    }
}

#[test]
fn config_init_writes_a_loadable_default() {
    let w = Workspace::new();
    let printed = ok(&["config", "init"]).stdout;
    let cfg = w.path("cfg.json");
    ok(&["config", "init", "--out", s(&cfg)]);
    assert_eq!(fs::read(&cfg).unwrap(), printed);
    let log = w.path("log.csv");
    ok(&["simulate", "--config", s(&cfg), "--cases", "4", "--out", s(&log)]);

    let text = String::from_utf8(printed).unwrap().replacen('{', "{\"extra\": 0,", 1);
    fs::write(&cfg, text).unwrap();
    let out = run(&["simulate", "--config", s(&cfg), "--cases", "4", "--out", s(&log)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_validates() {
    let w = Workspace::new();
    let a = w.simulate("a.csv", 25);
    let b = w.path("b.csv");
    let out = run_with_threads(&["simulate", "--seed", "5", "--cases", "25", "--out", s(&b)], Some(1));
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(ok(&["validate", "--in", s(&a)]).stdout.is_empty());

    let text = fs::read_to_string(&a).unwrap();
    let broken: String = text.lines().enumerate().map(|(i, l)| {
        if i == 3 { format!("{}\n", l.replacen(",2022-", ",2021-", 1)) } else { format!("{l}\n") }
    }).collect();
    let bad = w.path("bad.csv");
    fs::write(&bad, broken).unwrap();
    let out = run(&["validate", "--in", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("timestamp-order"));
}

#[test]
fn featurize_and_train_are_deterministic() {
    let w = Workspace::new();
    let log = w.simulate("log.csv", 20);
    let first = w.model(&log, "late", "pa-user", "gbdt");
    let first_bytes = fs::read(&first).unwrap();
    let data_bytes = fs::read(w.path("late-pa-user.csv")).unwrap();
    let second = w.model(&log, "late", "pa-user", "gbdt");
    assert_eq!(fs::read(second).unwrap(), first_bytes);
    assert_eq!(fs::read(w.path("late-pa-user.csv")).unwrap(), data_bytes);
    let header = String::from_utf8(data_bytes).unwrap().lines().next().unwrap().to_string();
    assert!(header.ends_with(",elapsed_working_days,label,group_key"));
    assert!(String::from_utf8(first_bytes).unwrap().starts_with("{\"format\":\"ipa-ppm-model\""));
}

#[test]
fn evaluate_writes_markdown_and_json() {
    let w = Workspace::new();
    let log = w.simulate("log.csv", 30);
    let (md, json) = (w.path("t.md"), w.path("t.json"));
    let hyper = w.path("hyper.json");
    let args = [
        "evaluate", "--in", s(&log), "--task", "late", "--matrix", "--folds", "3", "--seed", "2",
        "--hyper", s(&hyper), "--markdown", s(&md), "--json", s(&json),
    ];
    let out = ok(&args);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table, fs::read_to_string(&md).unwrap());
    assert_eq!(table.lines().count(), 10);
    assert!(table.starts_with("| Prediction method | Precision | Recall | F1 | Accuracy |"));
    let first_json = fs::read(&json).unwrap();
    ok(&args);
    assert_eq!(fs::read(&json).unwrap(), first_json);

    let single = ok(&[
        "evaluate", "--in", s(&log), "--task", "next", "--learner", "logit", "--regime", "npa-conv",
        "--folds", "3", "--hyper", s(&hyper),
    ]);
    assert!(String::from_utf8(single.stdout).unwrap().contains("| Logistic regression, npa, conv |"));
    assert_eq!(run(&["evaluate", "--in", s(&log), "--task", "next"]).status.code(), Some(2));
}

#[test]
fn recommend_emits_one_line_per_user_turn() {
    let w = Workspace::new();
    let log = w.simulate("log.csv", 10);
    let next = w.model(&log, "next", "pa-conv", "logit");
    let late = w.model(&log, "late", "pa-user", "gbdt");
    let report = w.path("r.jsonl");
    let both = [
        "recommend", "--in", s(&log), "--model", s(&next), "--model", s(&late), "--mode", "both", "--out", s(&report),
    ];
    ok(&both);
    let text = fs::read_to_string(&report).unwrap();
    let rows = fs::read_to_string(&log).unwrap().lines().skip(1).filter(|l| !l.contains(",Welcome Message,")).count();
    assert_eq!(text.lines().count(), rows);
    assert!(text.lines().all(|l| l.contains("\"recommendations\":[") && l.contains("\"assessment\":{")));
    assert!(!text.contains("\"activity\":\"fallback\""));

    let again = w.path("r2.jsonl");
    let mut args = both.to_vec();
    *args.last_mut().unwrap() = s(&again);
    assert!(run_with_threads(&args, Some(1)).status.success());
    assert_eq!(fs::read(&again).unwrap(), text.as_bytes());

    let flagged = w.path("flag.jsonl");
    ok(&["recommend", "--in", s(&log), "--model", s(&late), "--mode", "goal", "--flag-only", "--threshold", "0.2", "--out", s(&flagged)]);
    let flagged = fs::read_to_string(&flagged).unwrap();
    assert!(flagged.lines().all(|l| l.contains("\"intervene\":true") && l.contains("\"type\":\"reminder\"")));

    let missing = run(&["recommend", "--in", s(&log), "--model", s(&next), "--mode", "goal", "--out", s(&report)]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no model supplied"));
}
