//! Metrics, holdout grid search, the experiment runner and final model selection.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::SegmentPlan;
use crate::catalog::{fit_scaler, stratified_split, CatalogError, Rasa, Scaler, ScalerKind, SongRecord};
use crate::classifiers::{Classifier, Dataset, ModelError};
use crate::mfcc::{MfccConfig, MfccError};
use crate::model::{Family, FamilyParams, ParamError, TrainedModel};
use crate::store::{extract_manifest, FeatureStore};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no predictions to score")]
    EmptyInput,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("every grid point failed to train")]
    AllPointsFailed,
    #[error("no eligible model among the reports")]
    NoEligibleModel,
    #[error("extraction failed for {id}: {message}")]
    Extraction { id: String, message: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Mfcc(#[from] MfccError),
}

fn check_lengths(predictions: &[Rasa], labels: &[Rasa]) -> Result<(), ExperimentError> {
    if predictions.len() != labels.len() {
        return Err(ExperimentError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(predictions: &[Rasa], labels: &[Rasa]) -> Result<f64, ExperimentError> {
    check_lengths(predictions, labels)?;
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Counts indexed `[true][predicted]` in rasa order.
pub type ConfusionMatrix = [[usize; Rasa::COUNT]; Rasa::COUNT];

pub fn confusion_matrix(predictions: &[Rasa], labels: &[Rasa]) -> Result<ConfusionMatrix, ExperimentError> {
    check_lengths(predictions, labels)?;
    let mut m = [[0; Rasa::COUNT]; Rasa::COUNT];
    for (p, l) in predictions.iter().zip(labels) {
        m[l.index()][p.index()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub rasa: Rasa,
    pub support: usize,
    /// `None` when nothing was predicted as this class.
    pub precision: Option<f64>,
    /// `None` when the class has no validation rows.
    pub recall: Option<f64>,
}

pub fn class_metrics(m: &ConfusionMatrix) -> Vec<ClassMetrics> {
    Rasa::ALL
        .iter()
        .map(|&rasa| {
            let c = rasa.index();
            let support: usize = m[c].iter().sum();
            let predicted: usize = m.iter().map(|row| row[c]).sum();
            let tp = m[c][c] as f64;
            ClassMetrics {
                rasa,
                support,
                precision: (predicted > 0).then(|| tp / predicted as f64),
                recall: (support > 0).then(|| tp / support as f64),
            }
        })
        .collect()
}

/// Named axes of candidate values. Points are enumerated with the first
/// axis varying slowest and values in the order given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ParamGrid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl ParamGrid {
    pub fn new(axes: Vec<(String, Vec<String>)>) -> Self {
        Self { axes }
    }

    /// Parses axes written `name=v1,v2,...`.
    pub fn parse<S: AsRef<str>>(specs: &[S]) -> Result<Self, ParamError> {
        let axes = specs
            .iter()
            .map(|s| {
                let s = s.as_ref();
                let (name, values) = s
                    .split_once('=')
                    .ok_or_else(|| ParamError::new(s, "expected name=v1,v2,..."))?;
                let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
                if name.trim().is_empty() || values.iter().any(String::is_empty) {
                    return Err(ParamError::new(name, "empty name or value"));
                }
                Ok((name.trim().to_string(), values))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { axes })
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut points = vec![Vec::new()];
        if self.is_empty() {
            return Vec::new();
        }
        for (name, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((name.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// Every point applied on top of `base`, validated.
    pub fn resolve(&self, base: &FamilyParams) -> Result<Vec<FamilyParams>, ParamError> {
        self.points()
            .iter()
            .map(|point| {
                let mut p = base.clone();
                for (k, v) in point {
                    p.set(k, v)?;
                }
                p.validate()?;
                Ok(p)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub assignments: Vec<(String, String)>,
    pub params: FamilyParams,
    pub validation_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: usize,
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }
}

pub fn model_accuracy(model: &TrainedModel, data: &Dataset) -> Result<f64, ExperimentError> {
    accuracy(&model.predict_batch(data.features()), data.labels())
}

/// Fits every grid point on `train` and scores it on `validation`. Failed
/// points are kept as rows with an error; the best point is the first with
/// the highest accuracy in grid order.
pub fn grid_search(
    base: &FamilyParams,
    grid: &ParamGrid,
    train: &Dataset,
    validation: &Dataset,
) -> Result<GridResult, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let candidates = grid.resolve(base)?;
    let rows: Vec<GridRow> = grid
        .points()
        .into_par_iter()
        .zip(candidates)
        .map(|(assignments, params)| {
            let outcome = params
                .fit(train)
                .map_err(ExperimentError::from)
                .and_then(|m| model_accuracy(&m, validation));
            let (validation_accuracy, error) = match outcome {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            GridRow {
                assignments,
                params,
                validation_accuracy,
                error,
            }
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(a) = row.validation_accuracy {
            if best.is_none_or(|b| a > rows[b].validation_accuracy.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(i);
            }
        }
    }
    let best = best.ok_or(ExperimentError::AllPointsFailed)?;
    Ok(GridResult { best, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitLevel {
    /// Whole files go to one side; no shared audio across the split.
    #[default]
    File,
    /// Individual segments are split; overlapping cuts of a file may straddle it.
    Segment,
}

impl FromStr for SplitLevel {
    type Err = ParamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "file" => Ok(SplitLevel::File),
            "segment" => Ok(SplitLevel::Segment),
            other => Err(ParamError::new("split-level", format!("expected file or segment, got {other:?}"))),
        }
    }
}

impl fmt::Display for SplitLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLevel::File => "file",
            SplitLevel::Segment => "segment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub plan: SegmentPlan,
    pub scaler: ScalerKind,
    pub params: FamilyParams,
    pub grid: Option<ParamGrid>,
    pub val_fraction: f64,
    pub split_seed: u64,
    pub split_level: SplitLevel,
    pub mfcc: MfccConfig,
}

impl ExperimentConfig {
    pub fn new(params: FamilyParams) -> Self {
        Self {
            plan: SegmentPlan::bi_sample(),
            scaler: ScalerKind::Zscore,
            params,
            grid: None,
            val_fraction: 0.2,
            split_seed: 0,
            split_level: SplitLevel::File,
            mfcc: MfccConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub family: Family,
    /// Parameters of the evaluated model (the grid winner when tuning).
    pub params: FamilyParams,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub grid: Option<GridResult>,
    /// Not serialised, so reruns give identical files.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

/// Row indices for train and validation under the chosen split level.
pub fn split_store(
    store: &FeatureStore,
    val_fraction: f64,
    seed: u64,
    level: SplitLevel,
) -> Result<(Vec<usize>, Vec<usize>), CatalogError> {
    match level {
        SplitLevel::Segment => {
            let labels: Vec<Rasa> = store.rows.iter().map(|r| r.rasa).collect();
            let split = stratified_split(&labels, val_fraction, seed)?;
            Ok((split.train, split.validation))
        }
        SplitLevel::File => {
            let files = store.files();
            let labels: Vec<Rasa> = files.iter().map(|f| f.1).collect();
            let split = stratified_split(&labels, val_fraction, seed)?;
            let expand = |ids: &[usize]| {
                let mut rows: Vec<usize> = ids.iter().flat_map(|&i| files[i].2.iter().copied()).collect();
                rows.sort_unstable();
                rows
            };
            Ok((expand(&split.train), expand(&split.validation)))
        }
    }
}

/// Train and validation sets scaled with statistics of the train rows only.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub scaler: Scaler,
    pub train: Dataset,
    pub validation: Dataset,
}

pub fn prepare_split(
    store: &FeatureStore,
    scaler: ScalerKind,
    val_fraction: f64,
    seed: u64,
    level: SplitLevel,
) -> Result<PreparedSplit, ExperimentError> {
    let (train_rows, validation_rows) = split_store(store, val_fraction, seed, level)?;
    let all = store.dataset()?;
    let train_raw = all.subset(&train_rows);
    let val_raw = all.subset(&validation_rows);
    let scaler = fit_scaler(scaler, train_raw.features())?;
    Ok(PreparedSplit {
        train: Dataset::new(scaler.apply(train_raw.features()), train_raw.labels().to_vec())?,
        validation: Dataset::new(scaler.apply(val_raw.features()), val_raw.labels().to_vec())?,
        train_rows,
        validation_rows,
        scaler,
    })
}

/// Split, scale (fitted on train only), optionally tune, fit and evaluate.
pub fn run_on_store(config: &ExperimentConfig, store: &FeatureStore) -> Result<ExperimentReport, ExperimentError> {
    let started = std::time::Instant::now();
    let PreparedSplit {
        train, validation, ..
    } = prepare_split(store, config.scaler, config.val_fraction, config.split_seed, config.split_level)?;

    config.params.validate()?;
    let (params, grid) = match &config.grid {
        Some(g) => {
            let result = grid_search(&config.params, g, &train, &validation)?;
            (result.best_row().params.clone(), Some(result))
        }
        None => (config.params.clone(), None),
    };
    let model = params.fit(&train)?;
    let predictions = model.predict_batch(validation.features());
    let confusion = confusion_matrix(&predictions, validation.labels())?;
    Ok(ExperimentReport {
        config: config.clone(),
        family: params.family(),
        train_rows: train.len(),
        validation_rows: validation.len(),
        train_accuracy: model_accuracy(&model, &train)?,
        validation_accuracy: accuracy(&predictions, validation.labels())?,
        per_class: class_metrics(&confusion),
        confusion,
        params,
        grid,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

/// Full pipeline from a manifest: segment, MFCC, aggregate, then [`run_on_store`].
pub fn run_experiment(config: &ExperimentConfig, manifest: &[SongRecord]) -> Result<ExperimentReport, ExperimentError> {
    let (store, failures) = extract_manifest(manifest, &config.plan, &config.mfcc)?;
    if let Some(f) = failures.into_iter().next() {
        return Err(ExperimentError::Extraction {
            id: f.id,
            message: f.error.to_string(),
        });
    }
    run_on_store(config, &store)
}

fn seconds(v: f64) -> String {
    format!("{v}s")
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    /// Result table in the layout of the published tables, followed by the
    /// grid rows (if any) and the confusion matrix.
    pub fn to_markdown(&self) -> String {
        let cuts = self.config.plan.cuts();
        let starts: Vec<String> = cuts.iter().map(|c| seconds(c.start_s)).collect();
        let durations: Vec<String> = cuts.iter().map(|c| seconds(c.duration_s)).collect();
        let mut out = String::new();
        out.push_str("| Algorithm | Song Start Point | Song Duration | Validation Classification Accuracy | Model Architecture | Parameters |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        let mut row = |params: &FamilyParams, acc: String| {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                algorithm_name(params.family()),
                starts.join(", "),
                durations.join(", "),
                acc,
                architecture(params),
                params
            ));
        };
        match &self.grid {
            Some(g) => {
                for r in &g.rows {
                    let acc = match (&r.validation_accuracy, &r.error) {
                        (Some(a), _) => format!("{a:.4}"),
                        (None, Some(e)) => format!("failed: {e}"),
                        (None, None) => "-".into(),
                    };
                    row(&r.params, acc);
                }
            }
            None => row(&self.params, format!("{:.4}", self.validation_accuracy)),
        }
        out.push_str(&format!(
            "\nSelected: {} ({})  train accuracy {:.4}, validation accuracy {:.4} on {} rows, split by {}\n",
            algorithm_name(self.family),
            self.params,
            self.train_accuracy,
            self.validation_accuracy,
            self.validation_rows,
            self.config.split_level
        ));
        out.push_str("\n| true \\ predicted |");
        for r in Rasa::ALL {
            out.push_str(&format!(" {r} |"));
        }
        out.push_str(" recall |\n|---|");
        out.push_str(&"---|".repeat(Rasa::COUNT + 1));
        out.push('\n');
        for (r, m) in Rasa::ALL.iter().zip(&self.per_class) {
            out.push_str(&format!("| {r} |"));
            for c in &self.confusion[r.index()] {
                out.push_str(&format!(" {c} |"));
            }
            let recall = m.recall.map_or("-".into(), |v| format!("{v:.2}"));
            out.push_str(&format!(" {recall} |\n"));
        }
        out
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            params: self.params.clone(),
            validation_accuracy: self.validation_accuracy,
        }
    }
}

pub fn algorithm_name(family: Family) -> &'static str {
    match family {
        Family::Knn => "KNN",
        Family::NaiveBayes => "Naive Bayes - Gaussian",
        Family::Logreg => "Logistic Regression",
        Family::Svm => "SVM",
        Family::Forest => "Random Forest",
        Family::Mlp => "Simple ANN",
    }
}

fn architecture(params: &FamilyParams) -> String {
    match params {
        FamilyParams::Knn(p) => format!("k-nearest neighbours ({} weights)", p.weights),
        FamilyParams::NaiveBayes => "Gaussian likelihoods".into(),
        FamilyParams::Logreg(_) => "multinomial softmax".into(),
        FamilyParams::Svm(_) => "RBF kernel, one-vs-one".into(),
        FamilyParams::Forest(p) => format!("{} bagged CART trees", p.n_estimators),
        FamilyParams::Mlp(p) => format!(
            "4 Hidden Layer ({}), {} Epochs, batch size {}",
            p.hidden.map(|h| h.to_string()).join("-"),
            p.epochs,
            p.batch_size
        ),
    }
}

/// What model selection needs to know about a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub params: FamilyParams,
    pub validation_accuracy: f64,
}

/// Index of the chosen run: best validation accuracy among eligible runs
/// (single-neighbour KNN is not robust and never eligible); ties go to fewer
/// hyperparameters, then to the earlier family, then to the earlier run.
pub fn select_final_model(candidates: &[ModelSummary]) -> Result<usize, ExperimentError> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.params.is_knn_single_neighbour() || !c.validation_accuracy.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let o = &candidates[b];
                let key = |s: &ModelSummary| {
                    (
                        std::cmp::Reverse(s.params.hyperparameter_count()),
                        std::cmp::Reverse(s.params.family()),
                    )
                };
                c.validation_accuracy > o.validation_accuracy
                    || (c.validation_accuracy == o.validation_accuracy && key(c) > key(o))
            }
        };
        if better {
            best = Some(i);
        }
    }
    best.ok_or(ExperimentError::NoEligibleModel)
}
