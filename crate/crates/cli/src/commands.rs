use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use raga_moodkit::audio::{self, AudioError, SegmentPlan};
use raga_moodkit::catalog::{load_manifest, Rasa, Split};
use raga_moodkit::classifiers::{argmax, Classifier};
use raga_moodkit::experiments::{
    confusion_matrix, class_metrics, model_accuracy, prepare_split, run_on_store, ExperimentConfig,
    ParamGrid, SplitLevel,
};
use raga_moodkit::mfcc::{correlation_csv, feature_correlation, MfccConfig, MfccExtractor};
use raga_moodkit::model::{Family, FamilyParams, ModelBundle};
use raga_moodkit::recommender::{recommend_transition, score_library};
use raga_moodkit::store::{extract_manifest, FeatureStore, StoreConfig};
use raga_moodkit::synth::{write_corpus, SynthSpec};

use crate::{
    ClassifyArgs, Command, CorrelateArgs, EvaluateArgs, ExtractArgs, Failure, MfccArgs, OrFail,
    OutputFormat, ParamArgs, RecommendArgs, SplitArgs, SynthArgs, TrainArgs, TuneArgs,
};

pub fn run(command: Command, seed: u64) -> Result<(), Failure> {
    match command {
        Command::Synth(a) => synth(a, seed),
        Command::Extract(a) => extract(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Tune(a) => tune(a, seed),
        Command::Evaluate(a) => evaluate(a, seed),
        Command::Classify(a) => classify(a, seed),
        Command::Recommend(a) => recommend(a, seed),
        Command::Correlate(a) => correlate(a, seed),
    }
}

/// Prints the resolved configuration of a run to stderr.
fn echo(config: &impl Serialize) {
    eprintln!("config {}", serde_json::to_string(config).expect("config serialises"));
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_store(path: &Path) -> Result<FeatureStore, Failure> {
    FeatureStore::load(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_bundle(path: &Path) -> Result<ModelBundle, Failure> {
    ModelBundle::from_json(&read(path)?).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn mfcc_config(a: &MfccArgs) -> Result<MfccConfig, Failure> {
    let defaults = MfccConfig::default();
    let config = MfccConfig {
        fft_size: a.fft_size,
        hop: a.hop,
        n_filters: a.filters,
        n_coeffs: a.coeffs,
        f_low: a.f_low,
        f_high: a.f_high.unwrap_or(defaults.f_high),
        ..defaults
    };
    config.validate().invalid()?;
    Ok(config)
}

fn resolve_params(a: &ParamArgs, seed: u64) -> Result<FamilyParams, Failure> {
    let family: Family = a
        .family
        .as_deref()
        .ok_or_else(|| Failure::Validation("family: --family is required".into()))?
        .parse()
        .invalid()?;
    let mut params = FamilyParams::defaults(family).with_seed(seed);
    let named = [
        ("k", &a.k),
        ("metric", &a.metric),
        ("weights", &a.weights),
        ("C", &a.c),
        ("gamma", &a.gamma),
        ("max_iter", &a.max_iter),
        ("learning_rate", &a.learning_rate),
        ("n_estimators", &a.n_estimators),
        ("criterion", &a.criterion),
        ("max_depth", &a.max_depth),
        ("max_features", &a.max_features),
        ("min_samples_leaf", &a.min_samples_leaf),
        ("min_samples_split", &a.min_samples_split),
        ("hidden", &a.hidden),
        ("epochs", &a.epochs),
        ("batch_size", &a.batch_size),
    ];
    for (key, value) in named {
        if let Some(v) = value {
            params.set(key, v).invalid()?;
        }
    }
    for p in &a.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::Validation(format!("param: expected KEY=VALUE, got {p:?}")))?;
        params.set(k, v).invalid()?;
    }
    params.validate().invalid()?;
    Ok(params)
}

fn check_fraction(f: f64) -> Result<(), Failure> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Failure::Validation(format!("val-fraction: must lie in (0, 1), got {f}")))
    }
}

fn write_split_record(path: &Path, store: &FeatureStore, train: &[usize], validation: &[usize]) -> Result<(), Failure> {
    let ids: Vec<String> = store.rows.iter().map(|r| r.segment_id.clone()).collect();
    let split = Split {
        train: train.to_vec(),
        validation: validation.to_vec(),
    };
    write(path, split.to_csv(&ids))
}

#[derive(Serialize)]
struct SynthConfig<'a> {
    command: &'static str,
    out: &'a Path,
    spec: &'a SynthSpec,
}

fn synth(a: SynthArgs, seed: u64) -> Result<(), Failure> {
    let spec = SynthSpec {
        files_per_class: a.files_per_class,
        duration_s: a.duration,
        seed,
        ..SynthSpec::default()
    };
    spec.validate().invalid()?;
    echo(&SynthConfig {
        command: "synth",
        out: &a.out,
        spec: &spec,
    });
    let records = write_corpus(&spec, &a.out).runtime()?;
    println!(
        "wrote {} files and {}",
        records.len(),
        a.out.join("manifest.csv").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ExtractConfig<'a> {
    command: &'static str,
    manifest: &'a Path,
    out: &'a Path,
    plan: &'a SegmentPlan,
    mfcc: &'a MfccConfig,
    strict: bool,
    seed: u64,
}

fn extract(a: ExtractArgs, seed: u64) -> Result<(), Failure> {
    let plan = SegmentPlan::parse(&a.plan).invalid()?;
    let mfcc = mfcc_config(&a.mfcc)?;
    echo(&ExtractConfig {
        command: "extract",
        manifest: &a.manifest,
        out: &a.out,
        plan: &plan,
        mfcc: &mfcc,
        strict: a.strict,
        seed,
    });
    let records = load_manifest(&a.manifest).runtime()?;
    let (store, failures) = extract_manifest(&records, &plan, &mfcc).invalid()?;
    for f in &failures {
        eprintln!("error: {}: {}", f.id, f.error);
    }
    if a.strict && !failures.is_empty() {
        return Err(Failure::Runtime(format!(
            "{} of {} files failed",
            failures.len(),
            records.len()
        )));
    }
    store.save(&a.out).runtime()?;
    println!(
        "{} rows from {} files ({} failed) -> {}",
        store.rows.len(),
        records.len() - failures.len(),
        failures.len(),
        a.out.display()
    );
    Ok(())
}

/// Inputs that determine a training artifact; output paths are left out so
/// that reruns into other files produce identical bytes.
#[derive(Serialize)]
struct FitConfig<'a> {
    command: &'static str,
    store: &'a Path,
    params: &'a FamilyParams,
    scaler: String,
    val_fraction: Option<f64>,
    split_level: SplitLevel,
    grid: Option<&'a ParamGrid>,
    seed: u64,
}

fn train(a: TrainArgs, seed: u64) -> Result<(), Failure> {
    let params = resolve_params(&a.params, seed)?;
    if let Some(f) = a.val_fraction {
        check_fraction(f)?;
    }
    let config = FitConfig {
        command: "train",
        store: &a.store,
        params: &params,
        scaler: a.split.scaler.to_string(),
        val_fraction: a.val_fraction,
        split_level: a.split.split_level,
        grid: None,
        seed,
    };
    echo(&config);
    let store = load_store(&a.store)?;
    let (train_set, validation, scaler) = match a.val_fraction {
        Some(f) => {
            let p = prepare_split(&store, a.split.scaler, f, seed, a.split.split_level).runtime()?;
            if let Some(path) = &a.split.split_out {
                write_split_record(path, &store, &p.train_rows, &p.validation_rows)?;
            }
            (p.train, Some(p.validation), p.scaler)
        }
        None => {
            let data = store.dataset().runtime()?;
            let scaler = raga_moodkit::catalog::fit_scaler(a.split.scaler, data.features()).runtime()?;
            let scaled = raga_moodkit::classifiers::Dataset::new(scaler.apply(data.features()), data.labels().to_vec())
                .runtime()?;
            (scaled, None, scaler)
        }
    };
    let model = params.fit(&train_set).runtime()?;
    let train_accuracy = model_accuracy(&model, &train_set).runtime()?;
    println!("train accuracy {train_accuracy:.4} on {} rows", train_set.len());
    if let Some(v) = &validation {
        let acc = model_accuracy(&model, v).runtime()?;
        println!("validation accuracy {acc:.4} on {} rows", v.len());
    }
    let bundle = ModelBundle {
        model,
        params: params.clone(),
        scaler,
        features: store.config.clone(),
        train_accuracy,
        config: serde_json::to_value(&config).expect("config serialises"),
    };
    write(&a.out, bundle.to_json() + "\n")
}

fn experiment_config(
    params: FamilyParams,
    grid: Option<ParamGrid>,
    split: &SplitArgs,
    val_fraction: f64,
    seed: u64,
    store: &FeatureStore,
) -> ExperimentConfig {
    ExperimentConfig {
        plan: store.config.plan.clone(),
        scaler: split.scaler,
        params,
        grid,
        val_fraction,
        split_seed: seed,
        split_level: split.split_level,
        mfcc: store.config.mfcc.clone(),
    }
}

fn tune(a: TuneArgs, seed: u64) -> Result<(), Failure> {
    let params = resolve_params(&a.params, seed)?;
    check_fraction(a.val_fraction)?;
    let grid = ParamGrid::parse(&a.grid).invalid()?;
    grid.resolve(&params).invalid()?;
    let config = FitConfig {
        command: "tune",
        store: &a.store,
        params: &params,
        scaler: a.split.scaler.to_string(),
        val_fraction: Some(a.val_fraction),
        split_level: a.split.split_level,
        grid: Some(&grid),
        seed,
    };
    echo(&config);
    let store = load_store(&a.store)?;
    let exp = experiment_config(params.clone(), Some(grid.clone()), &a.split, a.val_fraction, seed, &store);
    let report = run_on_store(&exp, &store).runtime()?;
    eprintln!("elapsed {:.2}s", report.wall_clock_s);
    print!("{}", report.to_markdown());
    if let Some(path) = &a.report {
        write(path, report.to_json())?;
    }
    let prepared = prepare_split(&store, a.split.scaler, a.val_fraction, seed, a.split.split_level).runtime()?;
    if let Some(path) = &a.split.split_out {
        write_split_record(path, &store, &prepared.train_rows, &prepared.validation_rows)?;
    }
    if let Some(path) = &a.model_out {
        let model = report.params.fit(&prepared.train).runtime()?;
        let bundle = ModelBundle {
            train_accuracy: model_accuracy(&model, &prepared.train).runtime()?,
            model,
            params: report.params.clone(),
            scaler: prepared.scaler,
            features: store.config.clone(),
            config: serde_json::to_value(&config).expect("config serialises"),
        };
        write(path, bundle.to_json() + "\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ModelEvaluation {
    store: PathBuf,
    rows: usize,
    accuracy: f64,
    stored_train_accuracy: f64,
    confusion: [[usize; Rasa::COUNT]; Rasa::COUNT],
}

fn evaluate(a: EvaluateArgs, seed: u64) -> Result<(), Failure> {
    if let Some(model_path) = &a.model {
        echo(&serde_json::json!({
            "command": "evaluate",
            "store": a.store,
            "model": model_path,
        }));
        let bundle = load_bundle(model_path)?;
        let store = load_store(&a.store)?;
        if store.config.fingerprint != bundle.fingerprint() {
            return Err(Failure::Runtime(format!(
                "feature fingerprint {} does not match the model's {}",
                store.config.fingerprint,
                bundle.fingerprint()
            )));
        }
        let data = store.dataset().runtime()?;
        let rows = bundle.scaler.apply(data.features());
        let predictions = bundle.model.predict_batch(&rows);
        let confusion = confusion_matrix(&predictions, data.labels()).runtime()?;
        let accuracy = raga_moodkit::experiments::accuracy(&predictions, data.labels()).runtime()?;
        let eval = ModelEvaluation {
            store: a.store.clone(),
            rows: data.len(),
            accuracy,
            stored_train_accuracy: bundle.train_accuracy,
            confusion,
        };
        println!("accuracy {accuracy:.4} on {} rows (model's train accuracy {:.4})", eval.rows, eval.stored_train_accuracy);
        for m in class_metrics(&confusion) {
            let recall = m.recall.map_or("-".to_string(), |r| format!("{r:.4}"));
            println!("  {:<10} support {:>4}  recall {recall}", m.rasa.name(), m.support);
        }
        if let Some(path) = &a.report {
            write(path, serde_json::to_string_pretty(&eval).expect("serialises") + "\n")?;
        }
        return Ok(());
    }
    let params = resolve_params(&a.params, seed)?;
    check_fraction(a.val_fraction)?;
    let grid = if a.grid.is_empty() {
        None
    } else {
        Some(ParamGrid::parse(&a.grid).invalid()?)
    };
    let store = load_store(&a.store)?;
    let exp = experiment_config(params, grid, &a.split, a.val_fraction, seed, &store);
    echo(&serde_json::json!({"command": "evaluate", "store": a.store, "experiment": exp}));
    let report = run_on_store(&exp, &store).runtime()?;
    eprintln!("elapsed {:.2}s", report.wall_clock_s);
    print!("{}", report.to_markdown());
    if let Some(path) = &a.report {
        write(path, report.to_json())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Classification {
    file: PathBuf,
    segments: usize,
    scores: serde_json::Map<String, serde_json::Value>,
    predicted: Rasa,
}

fn classify(a: ClassifyArgs, seed: u64) -> Result<(), Failure> {
    echo(&serde_json::json!({"command": "classify", "model": a.model, "wav": a.wav, "seed": seed}));
    let bundle = load_bundle(&a.model)?;
    let fail = |e: &dyn std::fmt::Display| Failure::Runtime(format!("{}: {e}", a.wav.display()));
    let bytes = fs::read(&a.wav).map_err(|e| fail(&e))?;
    let buffer = audio::decode_wav::<f64>(&bytes).map_err(|e| fail(&e))?;
    let canonical = audio::canonicalize(&buffer);
    let extractor = MfccExtractor::<f64>::new(bundle.features.mfcc.clone()).map_err(|e| fail(&e))?;
    let mut sums = [0.0; Rasa::COUNT];
    let mut used = 0;
    for cut in bundle.features.plan.cuts() {
        // cuts that start past the end of a short file are skipped
        let segment = match audio::extract_segment(&canonical, cut.start_s, cut.duration_s) {
            Ok(s) => s,
            Err(AudioError::StartBeyondEnd { .. }) => continue,
            Err(e) => return Err(fail(&e)),
        };
        let fv = extractor.features(&segment.audio, "").map_err(|e| fail(&e))?;
        let scores = bundle.model.rasa_scores(&bundle.scaler.apply_row(&fv.values));
        for (s, v) in sums.iter_mut().zip(scores) {
            *s += v;
        }
        used += 1;
    }
    if used == 0 {
        return Err(fail(&"file is shorter than every cut of the segment plan"));
    }
    let scores: Vec<f64> = sums.iter().map(|s| s / used as f64).collect();
    let out = Classification {
        file: a.wav.clone(),
        segments: used,
        scores: Rasa::ALL
            .iter()
            .zip(&scores)
            .map(|(r, s)| (r.name().to_string(), serde_json::json!(s)))
            .collect(),
        predicted: Rasa::ALL[argmax(&scores)],
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("serialises"));
    Ok(())
}

fn recommend(a: RecommendArgs, seed: u64) -> Result<(), Failure> {
    echo(&serde_json::json!({
        "command": "recommend",
        "model": a.model,
        "manifest": a.manifest,
        "store": a.store,
        "from": a.from,
        "to": a.to,
        "length": a.length,
        "seed": seed,
    }));
    let bundle = load_bundle(&a.model)?;
    let (features, fingerprint) = match (&a.store, &a.manifest) {
        (Some(path), _) => {
            let store = load_store(path)?;
            (store.feature_vectors(), store.config.fingerprint)
        }
        (None, Some(path)) => {
            let records = load_manifest(path).runtime()?;
            let cfg: &StoreConfig = &bundle.features;
            let (store, failures) = extract_manifest(&records, &cfg.plan, &cfg.mfcc).runtime()?;
            for f in &failures {
                eprintln!("error: {}: {}", f.id, f.error);
            }
            (store.feature_vectors(), store.config.fingerprint)
        }
        (None, None) => return Err(Failure::Validation("one of --manifest or --store is required".into())),
    };
    let library = score_library(&bundle, &features, &fingerprint).runtime()?;
    let playlist = recommend_transition(&library, a.from, a.to, a.length as usize).runtime()?;
    match a.format {
        OutputFormat::Json => print!("{}", playlist.to_json()),
        OutputFormat::Text => print!("{}", playlist.to_text()),
    }
    Ok(())
}

fn correlate(a: CorrelateArgs, seed: u64) -> Result<(), Failure> {
    echo(&serde_json::json!({"command": "correlate", "store": a.store, "out": a.out, "seed": seed}));
    let store = load_store(&a.store)?;
    let matrix = feature_correlation(&store.feature_vectors()).runtime()?;
    write(&a.out, correlation_csv(&matrix))
}
