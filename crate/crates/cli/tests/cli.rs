use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn botprof(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_botprof"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = botprof(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn value(stdout: &str, key: &str) -> PathBuf {
    let prefix = format!("{key}=");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .map(PathBuf::from)
        .unwrap_or_else(|| panic!("no {key}= in {stdout}"))
}

const SMALL_LM: [&str; 8] = ["--set", "lm.embedding_dim=8", "--set", "lm.hidden=8", "--set", "lm.epochs=1", "--set", "lm.min_freq=1"];

#[test]
fn synth_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--set", "synth.n_accounts=40", "--set", "seed=5", "synth"];
    let sa = ok(a.path(), &args);
    let sb = ok(b.path(), &args);
    for key in ["corpus", "vectors"] {
        assert_eq!(fs::read(value(&sa, key)).unwrap(), fs::read(value(&sb, key)).unwrap(), "{key}");
    }
    let other = ok(b.path(), &["--set", "synth.n_accounts=40", "--set", "seed=6", "synth"]);
    assert_ne!(fs::read(value(&sa, "corpus")).unwrap(), fs::read(value(&other, "corpus")).unwrap());
}

#[test]
fn usage_errors_exit_with_1() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(botprof(d.path(), &["--set", "no.such.key=1", "synth"]).status.code(), Some(1));
    assert_eq!(botprof(d.path(), &["--set", "synth.n_accounts=many", "synth"]).status.code(), Some(1));
    assert_eq!(botprof(d.path(), &["--set", "synth.bot_fraction=1.5", "synth"]).status.code(), Some(1));
    assert_eq!(botprof(d.path(), &["train", "forest"]).status.code(), Some(1));
    assert_eq!(botprof(d.path(), &["evaluate"]).status.code(), Some(1), "missing model/corpus paths");
    assert!(botprof(d.path(), &["--help"]).status.success());
}

#[test]
fn config_file_and_overrides_compose() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "# tiny corpus\nsynth.n_accounts = 12\nseed=2\n").unwrap();
    let cfg_arg = cfg.to_str().unwrap();
    let s = ok(d.path(), &["-c", cfg_arg, "--set", "synth.format=jsonl", "synth"]);
    let corpus = value(&s, "corpus");
    assert_eq!(corpus.extension().unwrap(), "jsonl");
    let run_dir = value(&s, "run_dir");
    let written = fs::read_to_string(run_dir.join("config")).unwrap();
    assert!(written.contains("synth.n_accounts=12"), "{written}");
    assert!(written.contains("seed=2"));
    let ingest = ok(d.path(), &["--set", &format!("corpus={}", corpus.display()), "ingest"]);
    let summary = fs::read_to_string(value(&ingest, "run_dir").join("summary.json")).unwrap();
    assert!(summary.contains("genuine"), "{summary}");
}

#[test]
fn oracle_profiles_missing_is_a_data_error() {
    let d = tempfile::tempdir().unwrap();
    let csv = d.path().join("plain.csv");
    let mut text = String::from("tweet_id,account_id,bot_class,raw_text\n");
    for a in 0..6 {
        let class = if a % 2 == 0 { "genuine" } else { "traditional_spambot" };
        for t in 0..3 {
            text.push_str(&format!("t{a}{t},a{a},{class},hello world number {t} from {a}\n"));
        }
    }
    fs::write(&csv, text).unwrap();
    let corpus = format!("corpus={}", csv.display());
    let lm = ok(d.path(), &[&["--set", &corpus, "--set", "split.train_fraction=1"][..], &SMALL_LM, &["train-lm"]].concat());
    let embedder = format!("embedder={}", value(&lm, "embedder").display());
    let o = botprof(d.path(), &["--set", &corpus, "--set", &embedder, "train", "logreg"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn small_pipeline_writes_every_artifact() {
    let d = tempfile::tempdir().unwrap();
    let s = ok(d.path(), &["--set", "synth.n_accounts=80", "--set", "synth.separability=1", "synth"]);
    let corpus = format!("corpus={}", value(&s, "corpus").display());
    let vectors = format!("vectors={}", value(&s, "vectors").display());
    let base = [&["--set", corpus.as_str(), "--set", vectors.as_str()][..], &SMALL_LM].concat();

    let lm = ok(d.path(), &[&base[..], &["train-lm"]].concat());
    assert!(value(&lm, "run_dir").join("lm_log.json").is_file());
    let embedder = format!("embedder={}", value(&lm, "embedder").display());
    let with_emb = [&base[..], &["--set", embedder.as_str()]].concat();

    let tr = ok(d.path(), &[&with_emb[..], &["train", "ffnn"]].concat());
    let train_dir = value(&tr, "run_dir");
    assert!(train_dir.join("metrics.json").is_file());
    assert!(train_dir.join("config").is_file());
    let model = format!("model={}", value(&tr, "model").display());
    let with_model = [&with_emb[..], &["--set", model.as_str()]].concat();

    let ev = ok(d.path(), &[&with_model[..], &["evaluate"]].concat());
    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(value(&ev, "run_dir").join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["model"], "ffnn");
    let acc = metrics["primary"]["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let pr = ok(d.path(), &[&with_model[..], &["predict"]].concat());
    let preds = fs::read_to_string(value(&pr, "run_dir").join("predictions.jsonl")).unwrap();
    let csv = fs::read_to_string(value(&s, "corpus")).unwrap();
    assert_eq!(preds.lines().count(), csv.lines().count() - 1, "one prediction per tweet");

    let ex = ok(d.path(), &[&with_model[..], &["export-errors"]].concat());
    let errors = value(&ex, "run_dir").join("errors");
    for f in ["ffnn_true_positives.txt", "ffnn_false_positives.txt", "ffnn_summary.txt"] {
        assert!(errors.join(f).is_file(), "{f}");
    }

    let acct = ok(d.path(), &[&with_model[..], &["--set", "unit=account", "predict"]].concat());
    let lines = fs::read_to_string(value(&acct, "run_dir").join("predictions.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 80);
}
