//! Music mood classification built on the traditional raga/rasa association.
//!
//! Pipeline: WAV decode ([`audio`]) -> segment plan -> MFCC ([`mfcc`]) ->
//! rasa labels and scaling ([`catalog`]) -> classifiers ([`classifiers`],
//! [`svm`], [`ensemble`]) -> evaluation ([`experiments`]) -> playlists
//! ([`recommender`]).

pub mod audio;
pub mod catalog;
pub mod classifiers;
pub mod ensemble;
pub mod experiments;
pub mod mfcc;
pub mod model;
pub mod num;
mod packed;
pub mod recommender;
pub mod store;
pub mod svm;
pub mod synth;

pub use num::Real;

/// Double-precision aliases used by the classifiers and file formats.
pub type AudioBuffer = audio::AudioBuffer<f64>;
pub type Segment = audio::Segment<f64>;
pub type Spectrum = mfcc::Spectrum<f64>;
pub type MelFilterbank = mfcc::MelFilterbank<f64>;
pub type MfccExtractor = mfcc::MfccExtractor<f64>;

/// Single-precision variants of the DSP types.
pub type AudioBufferF32 = audio::AudioBuffer<f32>;
pub type MfccExtractorF32 = mfcc::MfccExtractor<f32>;

pub use audio::{AudioError, Cut, SegmentPlan, CANONICAL_RATE};
pub use mfcc::{FeatureVector, MfccConfig, MfccError};
