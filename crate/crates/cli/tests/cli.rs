use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

struct Output {
    code: i32,
    out: String,
    err: String,
}

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        Env { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn p(&self, rel: &str) -> String {
        self.path(rel).to_string_lossy().into_owned()
    }

    fn run_with(&self, args: &[&str], stdin: &str) -> Output {
        let mut argv = vec!["dialtrack".to_string()];
        argv.extend(args.iter().map(|a| a.to_string()));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = dialtrack_cli::run(argv, &mut Cursor::new(stdin.as_bytes().to_vec()), &mut out, &mut err);
        Output {
            code,
            out: String::from_utf8(out).unwrap(),
            err: String::from_utf8(err).unwrap(),
        }
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_with(args, "")
    }

    fn ok(&self, args: &[&str]) -> Output {
        let o = self.run(args);
        assert_eq!(o.code, 0, "{args:?}: {}", o.err);
        o
    }

    fn synth(&self) {
        self.ok(&["synth", "--out", &self.p("data"), "--preset", "small"]);
    }

    fn prepare_args(&self) -> Vec<String> {
        [
            "--prepared",
            &self.p("prepared"),
            "prepare",
            "--dialogues",
            &self.p("data/dialogues.jsonl"),
            "--articles",
            &self.p("data/articles.jsonl"),
            "--min-words",
            "5",
            "--dim",
            "8",
            "--doc2vec-epochs",
            "5",
            "--window",
            "3",
        ]
        .map(String::from)
        .to_vec()
    }

    fn prepare(&self, extra: &[&str]) -> Output {
        let mut args = self.prepare_args();
        args.extend(extra.iter().map(|s| s.to_string()));
        self.ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
    }

    fn train(&self, extra: &[&str]) -> Output {
        let prepared = self.p("prepared");
        let run = self.p("run");
        let mut args = vec![
            "--prepared", &prepared, "train", "--out", &run, "--epochs", "2", "--word-dim", "8", "--filters", "8",
            "--hidden", "8", "--window", "3",
        ];
        args.extend(extra);
        self.ok(&args)
    }

    fn ready() -> Self {
        let env = Env::new();
        env.synth();
        env.prepare(&[]);
        env.train(&[]);
        env
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn prepare_is_idempotent_and_hashes_every_artifact() {
    let env = Env::new();
    env.synth();
    env.prepare(&[]);
    let first = read(&env.path("prepared/manifest.json"));
    env.prepare(&[]);
    assert_eq!(read(&env.path("prepared/manifest.json")), first);

    let manifest: serde_json::Value = serde_json::from_str(&first).unwrap();
    let files = manifest["files"].as_object().unwrap();
    for name in ["dialogues.jsonl", "vocab.txt", "index.json", "targets.jsonl", "space/meta.json"] {
        assert!(files.contains_key(name), "{name}");
    }
    assert!(manifest["inputs"]["dialogues"].is_string());
    assert!(!env.path(".prepared.staging").exists());
}

#[test]
fn tampered_artifacts_are_rejected() {
    let env = Env::ready();
    fs::write(env.path("prepared/vocab.txt"), "tampered\n").unwrap();
    let o = env.run(&["--prepared", &env.p("prepared"), "evaluate", "--checkpoint", &env.p("run/model.ckpt")]);
    assert_eq!(o.code, 2);
    assert!(o.err.contains("[load]"), "{}", o.err);
}

#[test]
fn missing_input_is_a_tagged_data_error() {
    let env = Env::new();
    let o = env.run(&[
        "--prepared",
        &env.p("prepared"),
        "prepare",
        "--dialogues",
        &env.p("nope.jsonl"),
        "--articles",
        &env.p("nope2.jsonl"),
    ]);
    assert_eq!(o.code, 2);
    assert!(o.err.contains("[load]") && o.err.contains("nope.jsonl"), "{}", o.err);
    assert!(!env.path("prepared").exists());
}

#[test]
fn k_is_recorded_in_the_targets_header() {
    let env = Env::new();
    env.synth();
    env.prepare(&["--k", "3"]);
    let text = read(&env.path("prepared/targets.jsonl"));
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["k"], 3);
    let row: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    assert!(row["articles"].as_array().unwrap().len() <= 3);
}

#[test]
fn domain_regime_never_touches_the_topic_head() {
    let env = Env::new();
    env.synth();
    env.prepare(&[]);
    env.train(&["--model", "lrcn", "--regime", "D"]);
    let report: serde_json::Value = serde_json::from_str(&read(&env.path("run/train_report.json"))).unwrap();
    assert_eq!(report["topic_head_grad_abs"], 0.0);
    assert!(report["domain_head_grad_abs"].as_f64().unwrap() > 0.0);
}

#[test]
fn evaluation_is_repeatable_and_dumps_predictions() {
    let env = Env::ready();
    let args = ["--prepared", &env.p("prepared"), "evaluate", "--checkpoint", &env.p("run/model.ckpt"), "--dump-predictions"];
    let a = env.ok(&args);
    let json = read(&env.path("run/eval-test/report.json"));
    let b = env.ok(&args);
    assert_eq!(a.out, b.out);
    assert_eq!(read(&env.path("run/eval-test/report.json")), json);
    assert!(a.out.contains("Domain A"), "{}", a.out);

    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    let dump = read(&env.path("run/eval-test/predictions.txt"));
    let utterances = report["utterances"].as_u64().unwrap() as usize;
    let body = dump.lines().filter(|l| !l.trim().is_empty()).count() - utterances;
    assert!((1..=2).contains(&body), "header lines plus one row per utterance");
    let first = report["predictions"][0]["text"].as_str().unwrap();
    assert!(dump.contains(first));
}

#[test]
fn random_benchmark_needs_no_checkpoint() {
    let env = Env::new();
    env.synth();
    env.prepare(&[]);
    let o = env.ok(&[
        "--prepared",
        &env.p("prepared"),
        "evaluate",
        "--benchmark",
        "random",
        "--out",
        &env.p("random"),
    ]);
    assert!(o.out.contains("Random"), "{}", o.out);
    assert!(env.path("random/report.json").exists());
    let clash = env.run(&["evaluate", "--benchmark", "random", "--checkpoint", "x"]);
    assert_eq!(clash.code, 1);
}

#[test]
fn predict_streams_with_resets() {
    let env = Env::ready();
    let args = ["--prepared", &env.p("prepared"), "predict", "--checkpoint", &env.p("run/model.ckpt")];
    let lines = ["can we take the ferry", "", "what about food"];
    let o = env.run_with(&args, &lines.join("\n"));
    assert_eq!(o.code, 0, "{}", o.err);
    let rows: Vec<&str> = o.out.lines().collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let cols: Vec<&str> = r.split('\t').collect();
        assert_eq!(cols.len(), 4, "{r}");
        cols[3].parse::<f64>().unwrap();
    }

    // After RESET the session starts over, so the answers repeat.
    let again = env.run_with(&args, &format!("{0}\nRESET\n{0}\n", lines.join("\n")));
    let twice: Vec<&str> = again.out.lines().collect();
    assert_eq!(twice.len(), 6);
    assert_eq!(&twice[..3], &rows[..]);
    assert_eq!(&twice[3..], &rows[..]);
}

#[test]
fn invalid_config_fails_before_writing_anything() {
    let env = Env::new();
    env.synth();
    fs::write(env.path("bad.toml"), "[data]\nsplit = [0.5, 0.2, 0.2]\n").unwrap();
    let mut args = vec!["--config".to_string(), env.p("bad.toml")];
    args.extend(env.prepare_args());
    let o = env.run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.code, 1);
    assert!(o.err.contains("[config]"), "{}", o.err);
    assert!(!env.path("prepared").exists());
    assert!(!env.path(".prepared.staging").exists());

    fs::write(env.path("typo.toml"), "[model]\nwindw = 3\n").unwrap();
    let o = env.run(&["--config", &env.p("typo.toml"), "config"]);
    assert_eq!(o.code, 1);
}

#[test]
fn exit_codes() {
    let env = Env::new();
    assert_eq!(env.run(&["frobnicate"]).code, 1);
    assert_eq!(env.run(&["--help"]).code, 0);
    assert!(env.ok(&["config"]).out.contains("[model]"));

    let env = Env::new();
    env.synth();
    env.prepare(&["--pad"]);
    let prepared = env.p("prepared");
    let o = env.run(&["--prepared", &prepared, "train", "--out", &env.p("run"), "--epochs", "1", "--window", "3", "--word-dim", "8", "--filters", "8", "--hidden", "8", "--lr", "1e300"]);
    assert_eq!(o.code, 3, "{}", o.err);
    let o = env.run(&["--prepared", &prepared, "train", "--out", &env.p("run"), "--window", "4"]);
    assert_eq!(o.code, 1, "window must match the prepared padding: {}", o.err);
}
