//! Mood-transition playlists from per-song rasa scores.
//!
//! Slot `i` of an `L`-slot playlist blends the current and aspired rasa
//! scores with weight `w = i / (L - 1)` (`w = 1` for a single slot) and takes
//! the best remaining song; ties go to the smaller id.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Rasa;
use crate::mfcc::FeatureVector;
use crate::model::ModelBundle;
use crate::store::file_id_of;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommendError {
    #[error("feature fingerprint {features} does not match the model's {model}")]
    ScalerMismatch { model: String, features: String },
    #[error("{id} has {got} features, the model expects {expected}")]
    DimensionMismatch { id: String, expected: usize, got: usize },
    #[error("library is empty")]
    EmptyLibrary,
    #[error("playlist length must be at least 1")]
    ZeroLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSong {
    pub id: String,
    /// One score per rasa in rasa order.
    pub scores: [f64; Rasa::COUNT],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoredLibrary {
    pub songs: Vec<ScoredSong>,
}

/// Scores raw feature vectors with the bundle's scaler and model. Vectors
/// sharing a file id (`<id>#<k>`) are one song; its scores are the mean over
/// its segments.
pub fn score_library(
    bundle: &ModelBundle,
    features: &[FeatureVector],
    feature_fingerprint: &str,
) -> Result<ScoredLibrary, RecommendError> {
    if feature_fingerprint != bundle.fingerprint() {
        return Err(RecommendError::ScalerMismatch {
            model: bundle.fingerprint().to_string(),
            features: feature_fingerprint.to_string(),
        });
    }
    let mut songs: Vec<(ScoredSong, usize)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for fv in features {
        if fv.values.len() != bundle.scaler.dim() {
            return Err(RecommendError::DimensionMismatch {
                id: fv.source_id.clone(),
                expected: bundle.scaler.dim(),
                got: fv.values.len(),
            });
        }
        let scores = bundle.model.rasa_scores(&bundle.scaler.apply_row(&fv.values));
        let id = file_id_of(&fv.source_id).to_string();
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            songs.push((
                ScoredSong {
                    id,
                    scores: [0.0; Rasa::COUNT],
                },
                0,
            ));
            songs.len() - 1
        });
        let (song, n) = &mut songs[slot];
        for (a, s) in song.scores.iter_mut().zip(scores) {
            *a += s;
        }
        *n += 1;
    }
    Ok(ScoredLibrary {
        songs: songs
            .into_iter()
            .map(|(mut song, n)| {
                for s in &mut song.scores {
                    *s /= n as f64;
                }
                song
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub rank: usize,
    pub song_id: String,
    pub weight: f64,
    pub blended_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playlist {
    pub slots: Vec<Slot>,
}

/// Blend weight of slot `i` in a playlist of `len` slots.
pub fn slot_weight(i: usize, len: usize) -> f64 {
    if len <= 1 {
        1.0
    } else {
        i as f64 / (len - 1) as f64
    }
}

pub fn recommend_transition(
    library: &ScoredLibrary,
    current: Rasa,
    aspired: Rasa,
    length: usize,
) -> Result<Playlist, RecommendError> {
    if length == 0 {
        return Err(RecommendError::ZeroLength);
    }
    if library.songs.is_empty() {
        return Err(RecommendError::EmptyLibrary);
    }
    let len = length.min(library.songs.len());
    let mut remaining: Vec<&ScoredSong> = library.songs.iter().collect();
    remaining.sort_by(|a, b| a.id.cmp(&b.id));
    let mut slots = Vec::with_capacity(len);
    for i in 0..len {
        let w = slot_weight(i, len);
        let blend = |s: &ScoredSong| (1.0 - w) * s.scores[current.index()] + w * s.scores[aspired.index()];
        // remaining is id-sorted, so the first maximum is the smallest id
        let mut best = 0;
        for (j, s) in remaining.iter().enumerate().skip(1) {
            if blend(s) > blend(remaining[best]) {
                best = j;
            }
        }
        let song = remaining.remove(best);
        slots.push(Slot {
            rank: i + 1,
            song_id: song.id.clone(),
            weight: w,
            blended_score: blend(song),
        });
    }
    Ok(Playlist { slots })
}

impl Playlist {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("playlist serialises") + "\n"
    }

    pub fn to_text(&self) -> String {
        self.slots
            .iter()
            .map(|s| format!("{:>3}  {}  weight={:.3}  score={:.4}\n", s.rank, s.song_id, s.weight, s.blended_score))
            .collect()
    }
}
