//! Per-segment feature extraction over a manifest and the CSV feature store.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioError, SegmentPlan};
use crate::catalog::{Rasa, SongRecord};
use crate::classifiers::{Dataset, ModelError};
use crate::mfcc::{FeatureVector, MfccConfig, MfccError, MfccExtractor};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Audio { path: PathBuf, source: AudioError },
    #[error("{path}: {source}")]
    Mfcc { path: PathBuf, source: MfccError },
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad feature store header: {0}")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("config sidecar: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Mfcc(#[from] MfccError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `<file id>#<segment index>`.
pub fn segment_id(file_id: &str, index: usize) -> String {
    format!("{file_id}#{index}")
}

/// The file id a segment id was derived from.
pub fn file_id_of(segment_id: &str) -> &str {
    segment_id.rsplit_once('#').map_or(segment_id, |(f, _)| f)
}

/// Decodes, canonicalises and cuts one audio file, returning one feature vector per cut.
pub fn extract_file(
    path: &Path,
    file_id: &str,
    plan: &SegmentPlan,
    extractor: &MfccExtractor<f64>,
) -> Result<Vec<FeatureVector>, ExtractError> {
    let bytes = fs::read(path).map_err(|source| ExtractError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let audio_err = |source| ExtractError::Audio {
        path: path.to_path_buf(),
        source,
    };
    let buffer = audio::decode_wav::<f64>(&bytes).map_err(audio_err)?;
    let canonical = audio::canonicalize(&buffer);
    let segments = audio::bi_sample(&canonical, plan).map_err(audio_err)?;
    segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            extractor
                .features(&seg.audio, segment_id(file_id, k))
                .map_err(|source| ExtractError::Mfcc {
                    path: path.to_path_buf(),
                    source,
                })
        })
        .collect()
}

/// Settings that define a feature space; stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub mfcc: MfccConfig,
    pub plan: SegmentPlan,
    pub fingerprint: String,
}

impl StoreConfig {
    pub fn new(mfcc: MfccConfig, plan: SegmentPlan) -> Self {
        Self {
            fingerprint: mfcc.fingerprint(),
            mfcc,
            plan,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub segment_id: String,
    pub rasa: Rasa,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub config: StoreConfig,
    pub rows: Vec<FeatureRow>,
}

#[derive(Debug)]
pub struct FileFailure {
    pub id: String,
    pub error: ExtractError,
}

/// Extracts every manifest entry in parallel; rows keep manifest order.
/// Files that fail are skipped and reported.
pub fn extract_manifest(
    records: &[SongRecord],
    plan: &SegmentPlan,
    mfcc: &MfccConfig,
) -> Result<(FeatureStore, Vec<FileFailure>), MfccError> {
    let extractor = MfccExtractor::<f64>::new(mfcc.clone())?;
    let results: Vec<_> = records
        .par_iter()
        .map(|r| extract_file(&r.path, &r.id, plan, &extractor))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (record, result) in records.iter().zip(results) {
        match result {
            Ok(features) => rows.extend(features.into_iter().map(|f| FeatureRow {
                segment_id: f.source_id,
                rasa: record.rasa,
                values: f.values,
            })),
            Err(error) => failures.push(FileFailure {
                id: record.id.clone(),
                error,
            }),
        }
    }
    Ok((
        FeatureStore {
            config: StoreConfig::new(mfcc.clone(), plan.clone()),
            rows,
        },
        failures,
    ))
}

/// Sidecar path for a store: `features.csv` -> `features.csv.json`.
pub fn sidecar_path(store: &Path) -> PathBuf {
    let mut name = store.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

impl FeatureStore {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(self.config.mfcc.n_coeffs, |r| r.values.len())
    }

    /// `segment_id,rasa,c0..c{n-1}`; values use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_id,rasa");
        for i in 0..self.dim() {
            out.push_str(&format!(",c{i}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.segment_id);
            out.push(',');
            out.push_str(row.rasa.name());
            for v in &row.values {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, config: StoreConfig) -> Result<Self, StoreError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| StoreError::BadHeader(e.to_string()))?
            .clone();
        let dim = header.len().saturating_sub(2);
        let expected: Vec<String> = ["segment_id".to_string(), "rasa".to_string()]
            .into_iter()
            .chain((0..dim).map(|i| format!("c{i}")))
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) || dim == 0 {
            return Err(StoreError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let bad = |message: String| StoreError::BadRow { line, message };
            let record = record.map_err(|e| bad(e.to_string()))?;
            if record.len() != dim + 2 {
                return Err(bad(format!("expected {} fields, got {}", dim + 2, record.len())));
            }
            let rasa: Rasa = record[1].parse().map_err(|e| bad(format!("{e}")))?;
            let values = record
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>().map_err(|_| bad(format!("not a number: {v:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(FeatureRow {
                segment_id: record[0].to_string(),
                rasa,
                values,
            });
        }
        Ok(Self { config, rows })
    }

    /// Writes the CSV and its JSON config sidecar.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let io_err = |p: &Path| {
            let p = p.to_path_buf();
            move |source| StoreError::Io { path: p, source }
        };
        fs::write(path, self.to_csv()).map_err(io_err(path))?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.config).expect("config serialises") + "\n";
        fs::write(&side, json).map_err(io_err(&side))
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| StoreError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let text = read(path)?;
        let config: StoreConfig = serde_json::from_str(&read(&sidecar_path(path))?)
            .map_err(|e| StoreError::Sidecar(e.to_string()))?;
        if config.fingerprint != config.mfcc.fingerprint() {
            return Err(StoreError::Sidecar(
                "fingerprint does not match the recorded MFCC config".into(),
            ));
        }
        Self::from_csv(&text, config)
    }

    pub fn dataset(&self) -> Result<Dataset, ModelError> {
        Dataset::new(
            self.rows.iter().map(|r| r.values.clone()).collect(),
            self.rows.iter().map(|r| r.rasa).collect(),
        )
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureStore {
        FeatureStore {
            config: self.config.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Distinct file ids in first-appearance order with their rasa and row indices.
    pub fn files(&self) -> Vec<(String, Rasa, Vec<usize>)> {
        let mut out: Vec<(String, Rasa, Vec<usize>)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let id = file_id_of(&row.segment_id);
            let slot = *index.entry(id.to_string()).or_insert_with(|| {
                out.push((id.to_string(), row.rasa, Vec::new()));
                out.len() - 1
            });
            out[slot].2.push(i);
        }
        out
    }

    pub fn feature_vectors(&self) -> Vec<FeatureVector> {
        self.rows
            .iter()
            .map(|r| FeatureVector {
                source_id: r.segment_id.clone(),
                values: r.values.clone(),
            })
            .collect()
    }
}
