//! Synthetic labelled corpus: harmonic tones with class-specific spectra.
//!
//! Each rasa gets one recipe (register, harmonic profile, vibrato, noise
//! floor) and one raga from the table; files differ by seeded detuning,
//! harmonic jitter, note sequence and noise.

use std::f64::consts::TAU;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{encode_wav_pcm16, AudioBuffer, CANONICAL_RATE};
use crate::catalog::{rasa_for_raga, write_manifest, Genre, Rasa, SongRecord};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub rasa: Rasa,
    pub raga: String,
    pub fundamental_hz: f64,
    /// Relative amplitude of harmonics 1, 2, 3, ...
    pub harmonics: Vec<f64>,
    /// Scale degrees in semitones above the tonic.
    pub scale: Vec<i32>,
    pub vibrato_hz: f64,
    pub vibrato_depth: f64,
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub recipes: Vec<Recipe>,
    pub files_per_class: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

fn recipe(
    rasa: Rasa,
    raga: &str,
    fundamental_hz: f64,
    harmonics: &[f64],
    scale: &[i32],
    vibrato_hz: f64,
    noise_floor: f64,
) -> Recipe {
    Recipe {
        rasa,
        raga: raga.to_string(),
        fundamental_hz,
        harmonics: harmonics.to_vec(),
        scale: scale.to_vec(),
        vibrato_hz,
        vibrato_depth: 0.006,
        noise_floor,
    }
}

/// The six built-in recipes, in rasa order.
pub fn default_recipes() -> Vec<Recipe> {
    vec![
        recipe(
            Rasa::Adhbhutha,
            "Hindola",
            220.0,
            &[1.0, 0.08, 0.6, 0.05, 0.4, 0.03, 0.25, 0.02, 0.12],
            &[0, 3, 5, 8, 10],
            5.5,
            0.010,
        ),
        recipe(
            Rasa::Haasya,
            "Aathana",
            330.0,
            &[1.0, 0.5, 0.33, 0.25, 0.2, 0.17, 0.14, 0.12, 0.11, 0.1],
            &[0, 2, 5, 7, 11],
            6.5,
            0.020,
        ),
        recipe(
            Rasa::Karuna,
            "Shivaranjani",
            196.0,
            &[1.0, 0.5, 0.25, 0.12, 0.06],
            &[0, 2, 3, 7, 9],
            4.5,
            0.005,
        ),
        recipe(
            Rasa::Shantha,
            "Sama",
            262.0,
            &[1.0, 0.15, 0.05],
            &[0, 2, 5, 7, 9],
            3.0,
            0.003,
        ),
        recipe(
            Rasa::Shringara,
            "Kalyani",
            294.0,
            &[0.4, 0.8, 1.0, 0.7, 0.3, 0.15],
            &[0, 2, 4, 6, 7, 9, 11],
            5.0,
            0.010,
        ),
        recipe(
            Rasa::Veera,
            "Mohana",
            392.0,
            &[1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3],
            &[0, 2, 4, 7, 9],
            7.0,
            0.030,
        ),
    ]
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            recipes: default_recipes(),
            files_per_class: 20,
            duration_s: 90.0,
            sample_rate: CANONICAL_RATE,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.recipes.len() != Rasa::COUNT {
            return bad(format!("need {} recipes, got {}", Rasa::COUNT, self.recipes.len()));
        }
        for (i, a) in self.recipes.iter().enumerate() {
            if rasa_for_raga(&a.raga).ok() != Some(a.rasa) {
                return bad(format!("raga {:?} does not belong to {}", a.raga, a.rasa));
            }
            if a.harmonics.is_empty() || a.scale.is_empty() || a.fundamental_hz <= 0.0 {
                return bad(format!("recipe for {} is empty", a.rasa));
            }
            for b in &self.recipes[..i] {
                if a.rasa == b.rasa {
                    return bad(format!("two recipes for {}", a.rasa));
                }
                if a.fundamental_hz == b.fundamental_hz {
                    return bad(format!("{} and {} share a fundamental", a.rasa, b.rasa));
                }
            }
        }
        if self.files_per_class == 0 {
            return bad("files_per_class must be at least 1".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) || self.sample_rate == 0 {
            return bad("duration and sample rate must be positive".into());
        }
        Ok(())
    }
}

/// Renders one file. The output peaks below full scale.
pub fn render(recipe: &Recipe, duration_s: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = f64::from(sample_rate);
    let n = (duration_s * rate).round() as usize;
    let detune = 2f64.powf(rng.gen_range(-1.0..1.0) / 12.0);
    let tonic = recipe.fundamental_hz * detune;
    let amps: Vec<f64> = recipe
        .harmonics
        .iter()
        .map(|a| a * rng.gen_range(0.85..1.15))
        .collect();
    let nyquist = rate / 2.0;
    let norm: f64 = amps.iter().sum();
    let gain = rng.gen_range(0.3..0.6);
    let noise = recipe.noise_floor * rng.gen_range(0.7..1.3);
    let vib_phase0 = rng.gen_range(0.0..TAU);
    let ramp = (0.01 * rate) as usize;

    let mut out = Vec::with_capacity(n);
    let mut phase = 0.0f64;
    let mut i = 0;
    while i < n {
        let degree = recipe.scale[rng.gen_range(0..recipe.scale.len())];
        let octave = if rng.gen_bool(0.2) { 2.0 } else { 1.0 };
        let note_hz = tonic * octave * 2f64.powf(f64::from(degree) / 12.0);
        let len = ((rng.gen_range(0.4..0.8) * rate) as usize).min(n - i);
        let top = amps
            .iter()
            .enumerate()
            .take_while(|(k, _)| note_hz * (*k as f64 + 1.0) * 1.02 < nyquist)
            .count();
        for j in 0..len {
            let t = (i + j) as f64 / rate;
            let vib = 1.0 + recipe.vibrato_depth * (TAU * recipe.vibrato_hz * t + vib_phase0).sin();
            phase = (phase + TAU * note_hz * vib / rate) % TAU;
            // sin(k*phase) by the Chebyshev recurrence
            let (s1, c1) = phase.sin_cos();
            let (mut prev, mut cur) = (0.0, s1);
            let mut tone = 0.0;
            for a in &amps[..top] {
                tone += a * cur;
                let next = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = next;
            }
            let env = (j.min(len - 1 - j) as f64 / ramp as f64).min(1.0);
            out.push(gain * env * tone / norm + noise * rng.gen_range(-1.0..1.0));
        }
        i += len;
    }
    out
}

/// Writes `<rasa>_<nn>.wav` files and `manifest.csv` into `dir`; returns the records.
pub fn write_corpus(spec: &SynthSpec, dir: &Path) -> Result<Vec<SongRecord>, SynthError> {
    spec.validate()?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut records = Vec::new();
    for (c, recipe) in spec.recipes.iter().enumerate() {
        for f in 0..spec.files_per_class {
            let id = format!("{}_{:03}", recipe.rasa.name().to_ascii_lowercase(), f);
            let file_seed = spec
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((c * 1_000_003 + f) as u64);
            let samples = render(recipe, spec.duration_s, spec.sample_rate, file_seed);
            let file = format!("{id}.wav");
            let path = dir.join(&file);
            let bytes = encode_wav_pcm16(&AudioBuffer::mono(samples, spec.sample_rate));
            fs::write(&path, bytes).map_err(io_err(&path))?;
            records.push(SongRecord {
                id: id.clone(),
                path: PathBuf::from(file),
                title: format!("Synthetic {} {f}", recipe.raga),
                raga: recipe.raga.clone(),
                language: "none".into(),
                genre: Genre::IndianClassical,
                rasa: recipe.rasa,
            });
        }
    }
    let manifest = dir.join("manifest.csv");
    let file = fs::File::create(&manifest).map_err(io_err(&manifest))?;
    write_manifest(file, &records).map_err(|e| SynthError::Io {
        path: manifest.clone(),
        source: io::Error::other(e),
    })?;
    Ok(records)
}
