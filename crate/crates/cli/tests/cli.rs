use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn manifest(&self) -> PathBuf {
        self.path("corpus/manifest.csv")
    }

    fn store(&self) -> PathBuf {
        self.path("features.csv")
    }

    fn model(&self) -> PathBuf {
        self.path("knn.json")
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raga-moodkit"))
        .args(args)
        .env_remove("RAGA_MOODKIT_SEED")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

/// Two files per rasa, extracted and a KNN model trained on them.
fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture {
            root: dir.path().to_path_buf(),
            _dir: dir,
        };
        ok(&["synth", "--out", s(&f.path("corpus")), "--files-per-class", "2", "--duration", "81"]);
        ok(&["extract", "--manifest", s(&f.manifest()), "--out", s(&f.store())]);
        ok(&["train", "--store", s(&f.store()), "--family", "knn", "--k", "3", "--out", s(&f.model())]);
        f
    })
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["--help"]), 0);
    let f = fixture();
    let (store, out) = (f.store(), f.path("never.json"));
    let (store, out) = (s(&store), s(&out));
    assert_eq!(code(&["train", "--store", store, "--family", "knn", "--k", "0", "--out", out]), 1);
    assert_eq!(code(&["train", "--store", store, "--family", "tree", "--out", out]), 1);
    assert_eq!(code(&["train", "--store", store, "--family", "svm", "--param", "kernel=linear", "--out", out]), 1);
    assert_eq!(code(&["train", "--store", store, "--family", "svm", "--val-fraction", "1.5", "--out", out]), 1);
    assert!(!f.path("never.json").exists());
}

#[test]
fn bad_seed_env_exits_1() {
    let out = Command::new(env!("CARGO_BIN_EXE_raga-moodkit"))
        .args(["synth", "--out", "/nonexistent/x"])
        .env("RAGA_MOODKIT_SEED", "banana")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RAGA_MOODKIT_SEED"));
}

#[test]
fn runtime_errors_exit_2() {
    let f = fixture();
    let junk = f.path("junk.wav");
    std::fs::write(&junk, b"not audio at all").unwrap();
    let out = run(&["classify", "--model", s(&f.model()), s(&junk)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("junk.wav"));
    assert_eq!(code(&["evaluate", "--store", s(&f.path("missing.csv")), "--model", s(&f.model())]), 2);
}

#[test]
fn strict_extract_fails_on_missing_audio() {
    let f = fixture();
    let manifest = f.path("partial.csv");
    let text = std::fs::read_to_string(f.manifest()).unwrap();
    // partial.csv sits next to corpus/, so relative paths need the prefix
    let text = text
        .replace(",karuna_000.wav,", ",corpus/gone.wav,")
        .lines()
        .map(|l| {
            if l.starts_with("id,") || l.contains("corpus/") {
                l.to_string()
            } else {
                l.replacen(',', ",corpus/", 1)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&manifest, text + "\n").unwrap();
    let out = f.path("partial_features.csv");
    assert_eq!(code(&["extract", "--manifest", s(&manifest), "--out", s(&out), "--strict"]), 2);
    assert!(!out.exists());
    let stdout = ok(&["extract", "--manifest", s(&manifest), "--out", s(&out)]);
    assert!(stdout.contains("22 rows from 11 files (1 failed)"), "{stdout}");
}

#[test]
fn extract_is_repeatable() {
    let f = fixture();
    let again = f.path("again.csv");
    ok(&["extract", "--manifest", s(&f.manifest()), "--out", s(&again)]);
    assert_eq!(std::fs::read(f.store()).unwrap(), std::fs::read(&again).unwrap());
    let csv = std::fs::read_to_string(&again).unwrap();
    assert_eq!(csv.lines().count(), 1 + 24);
    assert!(csv.starts_with("segment_id,rasa,c0,"));
}

#[test]
fn tune_reports_every_grid_point() {
    let f = fixture();
    let report = f.path("tune.json");
    let stdout = ok(&[
        "tune", "--store", s(&f.store()), "--family", "svm", "--grid", "C=1,10", "gamma=0.01,0.1",
        "--val-fraction", "0.5", "--report", s(&report),
    ]);
    assert!(stdout.contains("| Algorithm |"), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let rows = v["grid"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let best = v["grid"]["best"].as_u64().unwrap() as usize;
    let best_acc = rows[best]["validation_accuracy"].as_f64().unwrap();
    assert!(rows.iter().all(|r| r["validation_accuracy"].as_f64().unwrap() <= best_acc));
    assert_eq!(v["validation_accuracy"].as_f64().unwrap(), best_acc);
}

#[test]
fn evaluate_saved_model_reproduces_train_accuracy() {
    let f = fixture();
    let stdout = ok(&["evaluate", "--store", s(&f.store()), "--model", s(&f.model())]);
    let first = stdout.lines().next().unwrap();
    let nums: Vec<&str> = first.split_whitespace().filter(|w| w.contains('.')).collect();
    assert!(first.starts_with("accuracy"), "{first}");
    assert_eq!(nums[0], nums[1].trim_end_matches(')'), "{first}");
}

#[test]
fn classify_prints_scores() {
    let f = fixture();
    let wav = f.path("corpus/veera_000.wav");
    let stdout = ok(&["classify", "--model", s(&f.model()), s(&wav)]);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["segments"], 2);
    let scores = v["scores"].as_object().unwrap();
    assert_eq!(scores.len(), 6);
    let total: f64 = scores.values().map(|x| x.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(v["predicted"].is_string());
}

#[test]
fn recommend_from_store_and_manifest() {
    let f = fixture();
    let stdout = ok(&[
        "recommend", "--model", s(&f.model()), "--store", s(&f.store()), "--from", "Karuna", "--to", "Veera",
        "--length", "5",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let slots = v["slots"].as_array().unwrap();
    assert_eq!(slots.len(), 5);
    let ids: std::collections::HashSet<&str> = slots.iter().map(|s| s["song_id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), 5);

    let text = ok(&[
        "recommend", "--model", s(&f.model()), "--manifest", s(&f.manifest()), "--from", "karuna", "--to",
        "veera", "--length", "40", "--format", "text",
    ]);
    assert_eq!(text.lines().count(), 12);

    assert_eq!(
        code(&["recommend", "--model", s(&f.model()), "--store", s(&f.store()), "--from", "Todi", "--to", "Veera"]),
        1
    );
    assert_eq!(
        code(&[
            "recommend", "--model", s(&f.model()), "--store", s(&f.store()), "--from", "Karuna", "--to", "Veera",
            "--length", "0",
        ]),
        1
    );
}

#[test]
fn correlate_writes_square_matrix() {
    let f = fixture();
    let out = f.path("corr.csv");
    ok(&["correlate", "--store", s(&f.store()), "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 41);
    assert_eq!(lines[1].split(',').count(), 41);
}

#[test]
fn seed_flag_and_env_agree() {
    let f = fixture();
    let (a, b) = (f.path("seed_flag.json"), f.path("seed_env.json"));
    ok(&[
        "train", "--store", s(&f.store()), "--family", "forest", "--n-estimators", "5", "--seed", "42", "--out",
        s(&a),
    ]);
    let out = Command::new(env!("CARGO_BIN_EXE_raga-moodkit"))
        .args(["train", "--store", s(&f.store()), "--family", "forest", "--n-estimators", "5", "--out", s(&b)])
        .env("RAGA_MOODKIT_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
