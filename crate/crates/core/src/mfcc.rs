//! Mel-frequency cepstral coefficients from first principles.
//!
//! The chain for one frame is
//! `hann window -> dft -> power_spectrum -> log_mel_energies -> dct_ii`,
//! and a segment's feature vector is the per-coefficient mean over all of
//! its frames. Every stage is generic over [`Real`].
//!
//! Framing: frame `i` covers samples `[i * hop, i * hop + fft_size)`, the tail
//! is zero padded, and a segment of `len` samples yields `ceil(len / hop)`
//! frames.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{AudioBuffer, CANONICAL_RATE};
use crate::num::Real;

/// Scale constant of the mel warp `B(f) = 1125 ln(1 + f / 700)`.
pub const MEL_SCALE: f64 = 1125.0;
/// Corner frequency of the mel warp, in Hz.
pub const MEL_CORNER_HZ: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfccError {
    #[error("frame length {got} does not match transform size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("mel filterbank boundaries {index} and {} coincide", index + 1)]
    DegenerateBank { index: usize },
    #[error("segment of {samples} samples is shorter than one hop ({hop})")]
    EmptySegment { samples: usize, hop: usize },
    #[error("segment sample rate {got} Hz differs from configured {expected} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("segment has {0} channels, expected mono")]
    NotMono(u16),
    #[error("feature {feature} has zero variance")]
    ZeroVariance { feature: usize },
    #[error("need at least {needed} feature vectors, got {got}")]
    NotEnoughRows { needed: usize, got: usize },
    #[error("feature vectors have inconsistent lengths")]
    RaggedFeatures,
    #[error("invalid MFCC config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
    pub n_filters: usize,
    pub n_coeffs: usize,
    pub f_low: f64,
    pub f_high: f64,
    pub sample_rate: u32,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            fft_size: 2048,
            hop: 512,
            window: Window::Hann,
            n_filters: 40,
            n_coeffs: 40,
            f_low: 0.0,
            f_high: f64::from(CANONICAL_RATE) / 2.0,
            sample_rate: CANONICAL_RATE,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), MfccError> {
        let fail = |msg: String| Err(MfccError::InvalidConfig(msg));
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return fail(format!("fft_size {} is not a power of two", self.fft_size));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return fail(format!("hop {} must be in 1..={}", self.hop, self.fft_size));
        }
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive".into());
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if !(self.f_low >= 0.0 && self.f_low < self.f_high && self.f_high <= nyquist) {
            return fail(format!(
                "need 0 <= f_low < f_high <= {nyquist}, got f_low={} f_high={}",
                self.f_low, self.f_high
            ));
        }
        if self.n_filters == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_filters {
            return fail(format!(
                "need 1 <= n_coeffs <= n_filters, got n_coeffs={} n_filters={}",
                self.n_coeffs, self.n_filters
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail(format!("log_floor {} must be positive", self.log_floor));
        }
        Ok(())
    }

    /// Number of frames produced for a segment of `samples` samples.
    pub fn frame_count(&self, samples: usize) -> usize {
        samples.div_ceil(self.hop)
    }

    /// Hex SHA-256 of the canonical JSON form; identifies feature spaces.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Complex DFT bins `X[0..N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub bins: Vec<Complex<T>>,
}

/// Precomputed twiddles and bit-reversal permutation for one radix-2 size.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    size: usize,
    twiddles: Vec<Complex<T>>,
    reversed: Vec<usize>,
}

impl<T: Real> FftPlan<T> {
    pub fn new(size: usize) -> Result<Self, MfccError> {
        if !size.is_power_of_two() {
            return Err(MfccError::LengthMismatch {
                expected: size.next_power_of_two(),
                got: size,
            });
        }
        let bits = size.trailing_zeros();
        let reversed = (0..size)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..size / 2)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / size as f64;
                Complex::new(T::of(angle.cos()), T::of(angle.sin()))
            })
            .collect();
        Ok(Self {
            size,
            twiddles,
            reversed,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place iterative decimation-in-time transform.
    pub fn process(&self, data: &mut [Complex<T>]) {
        let n = self.size;
        assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.reversed[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    pub fn transform_real(&self, frame: &[T]) -> Result<Spectrum<T>, MfccError> {
        if frame.len() != self.size {
            return Err(MfccError::LengthMismatch {
                expected: self.size,
                got: frame.len(),
            });
        }
        let mut bins: Vec<Complex<T>> =
            frame.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.process(&mut bins);
        Ok(Spectrum { bins })
    }
}

/// `X[k] = sum_n x[n] e^{-j 2 pi n k / N}` via radix-2 FFT. `N` is `frame.len()`
/// and must equal `fft_size`, a power of two.
pub fn dft<T: Real>(frame: &[T], fft_size: usize) -> Result<Spectrum<T>, MfccError> {
    FftPlan::new(fft_size)?.transform_real(frame)
}

/// `|X[k]|^2` for `k = 0..=N/2`.
pub fn power_spectrum<T: Real>(spectrum: &Spectrum<T>) -> Vec<T> {
    let half = spectrum.bins.len() / 2;
    spectrum.bins[..=half].iter().map(|z| z.norm_sqr()).collect()
}

/// Mel warp `B(f) = 1125 ln(1 + f/700)`.
pub fn mel<T: Real>(f: T) -> T {
    T::of(MEL_SCALE) * (f / T::of(MEL_CORNER_HZ)).ln_1p()
}

/// Inverse warp `B^-1(b) = 700 (e^{b/1125} - 1)`.
pub fn mel_inv<T: Real>(b: T) -> T {
    T::of(MEL_CORNER_HZ) * (b / T::of(MEL_SCALE)).exp_m1()
}

/// Filter edges `f[0..=M+1]` in (fractional) FFT-bin units, uniform in mel.
pub fn filterbank_boundaries<T: Real>(config: &MfccConfig) -> Result<Vec<T>, MfccError> {
    config.validate()?;
    let m = config.n_filters;
    let lo = mel(T::of(config.f_low));
    let hi = mel(T::of(config.f_high));
    let step = (hi - lo) / T::of_usize(m + 1);
    let bins_per_hz = T::of_usize(config.fft_size) / T::of(f64::from(config.sample_rate));
    let mut edges: Vec<T> = (0..=m + 1)
        .map(|i| bins_per_hz * mel_inv(lo + T::of_usize(i) * step))
        .collect();
    // pin the endpoints so they are exact rather than round-tripped through the warp
    edges[0] = bins_per_hz * T::of(config.f_low);
    edges[m + 1] = bins_per_hz * T::of(config.f_high);
    let min_gap = T::of(1e-9);
    for i in 0..=m {
        if edges[i + 1] - edges[i] <= min_gap {
            return Err(MfccError::DegenerateBank { index: i });
        }
    }
    Ok(edges)
}

/// Triangular filters `H[m, k]` evaluated at integer bins `k = 0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    pub boundaries: Vec<T>,
    pub weights: Vec<Vec<T>>,
    /// Half-open range of bins where each row is nonzero.
    support: Vec<(usize, usize)>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Center frequency of filter `row` (0-based) in Hz.
    pub fn center_hz(&self, row: usize, config: &MfccConfig) -> f64 {
        self.boundaries[row + 1].as_f64() * f64::from(config.sample_rate) / config.fft_size as f64
    }

    /// `sum_k power[k] H[m, k]` for every filter, skipping bins outside each support.
    pub fn apply(&self, power: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.support)
            .map(|(row, &(a, b))| {
                row[a..b]
                    .iter()
                    .zip(&power[a..b])
                    .fold(T::zero(), |acc, (&h, &p)| acc + h * p)
            })
            .collect()
    }
}

/// Evaluates the four-branch triangular filter formula for every filter and bin.
pub fn build_filterbank<T: Real>(config: &MfccConfig) -> Result<MelFilterbank<T>, MfccError> {
    let f = filterbank_boundaries::<T>(config)?;
    let n_bins = config.fft_size / 2 + 1;
    let mut weights = Vec::with_capacity(config.n_filters);
    let mut support = Vec::with_capacity(config.n_filters);
    for m in 1..=config.n_filters {
        let (left, center, right) = (f[m - 1], f[m], f[m + 1]);
        let row: Vec<T> = (0..n_bins)
            .map(|k| {
                let k = T::of_usize(k);
                if k < left || k > right {
                    T::zero()
                } else if k <= center {
                    (k - left) / (center - left)
                } else {
                    (right - k) / (right - center)
                }
            })
            .collect();
        let first = row.iter().position(|w| *w > T::zero()).unwrap_or(0);
        let last = row.iter().rposition(|w| *w > T::zero()).map_or(0, |i| i + 1);
        support.push((first, last.max(first)));
        weights.push(row);
    }
    Ok(MelFilterbank {
        boundaries: f,
        weights,
        support,
    })
}

/// `S[m] = ln(max(sum_k power[k] H[m, k], floor))`.
pub fn log_mel_energies<T: Real>(
    power: &[T],
    bank: &MelFilterbank<T>,
    log_floor: T,
) -> Result<Vec<T>, MfccError> {
    if power.len() != bank.n_bins() {
        return Err(MfccError::LengthMismatch {
            expected: bank.n_bins(),
            got: power.len(),
        });
    }
    Ok(bank
        .apply(power)
        .into_iter()
        .map(|e| e.max(log_floor).ln())
        .collect())
}

/// Cosine basis `cos(pi n (m + 1/2) / M)` for `n < n_coeffs`, `m < M`.
#[derive(Debug, Clone)]
pub struct DctBasis<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Real> DctBasis<T> {
    pub fn new(n_inputs: usize, n_coeffs: usize) -> Self {
        let rows = (0..n_coeffs)
            .map(|n| {
                (0..n_inputs)
                    .map(|m| {
                        // reduce the angle modulo 2 pi in exact integer arithmetic first
                        let num = (n * (2 * m + 1)) % (4 * n_inputs);
                        let angle = std::f64::consts::PI * num as f64 / (2 * n_inputs) as f64;
                        T::of(angle.cos())
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn apply(&self, input: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(input).fold(T::zero(), |acc, (&c, &s)| acc + c * s))
            .collect()
    }
}

/// Unscaled DCT-II: `c(n) = sum_{m<M} S[m] cos(pi n (m + 0.5) / M)`, first `n_coeffs` outputs.
pub fn dct_ii<T: Real>(input: &[T], n_coeffs: usize) -> Result<Vec<T>, MfccError> {
    if n_coeffs > input.len() {
        return Err(MfccError::LengthMismatch {
            expected: n_coeffs,
            got: input.len(),
        });
    }
    Ok(DctBasis::new(input.len(), n_coeffs).apply(input))
}

/// Periodic Hann window of length `n`.
pub fn hann_window<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let phase = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            T::of(0.5 - 0.5 * phase.cos())
        })
        .collect()
}

/// Reusable, immutable per-config state (window, FFT plan, filterbank, DCT basis).
#[derive(Debug, Clone)]
pub struct MfccExtractor<T> {
    config: MfccConfig,
    window: Vec<T>,
    plan: FftPlan<T>,
    bank: MelFilterbank<T>,
    dct: DctBasis<T>,
    log_floor: T,
}

impl<T: Real> MfccExtractor<T> {
    pub fn new(config: MfccConfig) -> Result<Self, MfccError> {
        config.validate()?;
        let bank = build_filterbank(&config)?;
        Ok(Self {
            window: hann_window(config.fft_size),
            plan: FftPlan::new(config.fft_size)?,
            dct: DctBasis::new(config.n_filters, config.n_coeffs),
            log_floor: T::of(config.log_floor),
            bank,
            config,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank<T> {
        &self.bank
    }

    /// Cepstral coefficients of one already-windowed or raw frame of exactly `fft_size` samples.
    pub fn frame_coefficients(&self, frame: &[T]) -> Result<Vec<T>, MfccError> {
        let spectrum = self.plan.transform_real(frame)?;
        let power = power_spectrum(&spectrum);
        let energies = log_mel_energies(&power, &self.bank, self.log_floor)?;
        Ok(self.dct.apply(&energies))
    }

    /// One row of `n_coeffs` values per hop-strided Hann-windowed frame.
    pub fn frames(&self, segment: &AudioBuffer<T>) -> Result<Vec<Vec<T>>, MfccError> {
        if segment.channels != 1 {
            return Err(MfccError::NotMono(segment.channels));
        }
        if segment.sample_rate != self.config.sample_rate {
            return Err(MfccError::SampleRateMismatch {
                expected: self.config.sample_rate,
                got: segment.sample_rate,
            });
        }
        let samples = &segment.samples;
        let (n, hop) = (self.config.fft_size, self.config.hop);
        if samples.len() < hop {
            return Err(MfccError::EmptySegment {
                samples: samples.len(),
                hop,
            });
        }
        let mut frame = vec![T::zero(); n];
        (0..self.config.frame_count(samples.len()))
            .map(|i| {
                let start = i * hop;
                let end = (start + n).min(samples.len());
                let filled = end - start;
                for (dst, (&x, &w)) in frame
                    .iter_mut()
                    .zip(samples[start..end].iter().zip(&self.window))
                {
                    *dst = x * w;
                }
                frame[filled..].fill(T::zero());
                self.frame_coefficients(&frame)
            })
            .collect()
    }

    /// Frames followed by mean aggregation.
    pub fn features(
        &self,
        segment: &AudioBuffer<T>,
        source_id: impl Into<String>,
    ) -> Result<FeatureVector, MfccError> {
        aggregate_features(&self.frames(segment)?, source_id)
    }
}

/// Frame-level coefficients for a mono segment at the configured rate.
pub fn mfcc_frames<T: Real>(
    segment: &AudioBuffer<T>,
    config: &MfccConfig,
) -> Result<Vec<Vec<T>>, MfccError> {
    MfccExtractor::new(config.clone())?.frames(segment)
}

/// Per-segment aggregated coefficients: the classifier input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub source_id: String,
    pub values: Vec<f64>,
}

/// Per-coefficient arithmetic mean over frames (accumulated in `f64`).
pub fn aggregate_features<T: Real>(
    frames: &[Vec<T>],
    source_id: impl Into<String>,
) -> Result<FeatureVector, MfccError> {
    let first = frames.first().ok_or(MfccError::NotEnoughRows { needed: 1, got: 0 })?;
    let mut sums = vec![0.0f64; first.len()];
    for frame in frames {
        if frame.len() != sums.len() {
            return Err(MfccError::RaggedFeatures);
        }
        for (s, &v) in sums.iter_mut().zip(frame) {
            *s += v.as_f64();
        }
    }
    let count = frames.len() as f64;
    Ok(FeatureVector {
        source_id: source_id.into(),
        values: sums.into_iter().map(|s| s / count).collect(),
    })
}

/// Pearson correlation between every pair of feature columns.
pub fn feature_correlation(features: &[FeatureVector]) -> Result<Vec<Vec<f64>>, MfccError> {
    if features.len() < 2 {
        return Err(MfccError::NotEnoughRows {
            needed: 2,
            got: features.len(),
        });
    }
    let dim = features[0].values.len();
    if features.iter().any(|f| f.values.len() != dim) {
        return Err(MfccError::RaggedFeatures);
    }
    let n = features.len() as f64;
    let means: Vec<f64> = (0..dim)
        .map(|j| features.iter().map(|f| f.values[j]).sum::<f64>() / n)
        .collect();
    let centered: Vec<Vec<f64>> = (0..dim)
        .map(|j| features.iter().map(|f| f.values[j] - means[j]).collect())
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(feature) = norms.iter().position(|&s| s == 0.0) {
        return Err(MfccError::ZeroVariance { feature });
    }
    Ok((0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| {
                    if a == b {
                        return 1.0;
                    }
                    let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
                    (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect())
}

/// Correlation matrix as CSV with `c0..cN` row and column labels.
pub fn correlation_csv(matrix: &[Vec<f64>]) -> String {
    let mut out = String::from("feature");
    for j in 0..matrix.len() {
        out.push_str(&format!(",c{j}"));
    }
    out.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        out.push_str(&format!("c{i}"));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let a = -2.0 * std::f64::consts::PI * ((t * k) % n) as f64 / n as f64;
                        Complex::new(v * a.cos(), v * a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn argmax_bin(w: &[f64]) -> usize {
        (0..w.len()).fold(0, |b, i| if w[i] > w[b] { i } else { b })
    }

    #[test]
    fn dft_of_impulse_and_constant() {
        let s = dft(&[1.0f64, 0.0, 0.0, 0.0], 4).unwrap();
        assert!(s.bins.iter().all(|z| *z == Complex::new(1.0, 0.0)));
        let s = dft(&[1.0f64; 4], 4).unwrap();
        assert_eq!(s.bins[0], Complex::new(4.0, 0.0));
        assert!(s.bins[1..].iter().all(|z| z.norm() < 1e-15));
        assert!(matches!(
            dft(&[1.0f64; 3], 4),
            Err(MfccError::LengthMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn dft_matches_naive_small() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let fast = dft(&x, 64).unwrap();
        let slow = naive_dft(&x);
        for (a, b) in fast.bins.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_works_in_single_precision() {
        let s = dft(&[1.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 8).unwrap();
        assert!(s.bins.iter().all(|z| (z.re - 1.0).abs() < 1e-6 && z.im.abs() < 1e-6));
    }

    #[test]
    fn power_spectrum_values() {
        let spectrum = Spectrum {
            bins: vec![Complex::new(1.0, 0.0); 8],
        };
        assert_eq!(power_spectrum(&spectrum), vec![1.0; 5]);
        let spectrum = Spectrum {
            bins: vec![Complex::new(3.0, 4.0), Complex::new(0.0, 0.0)],
        };
        assert_eq!(power_spectrum(&spectrum), vec![25.0, 0.0]);
    }

    #[test]
    fn mel_pair() {
        assert_eq!(mel(0.0f64), 0.0);
        assert_eq!(mel_inv(0.0f64), 0.0);
        assert!((mel(700.0f64) - 1125.0 * 2f64.ln()).abs() < 1e-9);
        assert!((mel(700.0f64) - 779.79).abs() < 0.01);
        for f in [100.0f64, 1000.0, 11025.0] {
            assert!((mel_inv(mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_endpoints_and_first_interior() {
        let cfg = MfccConfig::default();
        let f = filterbank_boundaries::<f64>(&cfg).unwrap();
        assert_eq!(f.len(), 42);
        assert_eq!(f[0], 0.0);
        assert!((f[41] - 1024.0).abs() < 1e-9);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
        // hand evaluation: 700 (exp(1125 ln(1 + 11025/700) / 41 / 1125) - 1) * 2048 / 22050
        let b_hi = 1125.0 * (1.0f64 + 11025.0 / 700.0).ln();
        let hz = 700.0 * ((b_hi / 41.0 / 1125.0).exp() - 1.0);
        assert!((f[1] - hz * 2048.0 / 22050.0).abs() < 1e-9);

        let cfg = MfccConfig {
            f_low: 300.0,
            f_high: 8000.0,
            ..MfccConfig::default()
        };
        let f = filterbank_boundaries::<f64>(&cfg).unwrap();
        assert!((f[0] - 2048.0 * 300.0 / 22050.0).abs() < 1e-12);
        assert!((f[41] - 2048.0 * 8000.0 / 22050.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_bank_detected() {
        let cfg = MfccConfig {
            f_low: 1000.0,
            f_high: 1000.0 + 1e-9,
            ..MfccConfig::default()
        };
        assert!(matches!(
            filterbank_boundaries::<f64>(&cfg),
            Err(MfccError::DegenerateBank { .. })
        ));
    }

    #[test]
    fn filter_shape() {
        let cfg = MfccConfig::default();
        let bank = build_filterbank::<f64>(&cfg).unwrap();
        assert_eq!(bank.n_filters(), 40);
        assert_eq!(bank.n_bins(), 1025);
        for (row, w) in bank.weights.iter().enumerate() {
            let (l, c, r) = (
                bank.boundaries[row],
                bank.boundaries[row + 1],
                bank.boundaries[row + 2],
            );
            for (k, &h) in w.iter().enumerate() {
                let kf = k as f64;
                assert!((0.0..=1.0).contains(&h));
                if kf <= l || kf >= r {
                    assert_eq!(h, 0.0, "row {row} bin {k}");
                }
                if kf == c {
                    assert_eq!(h, 1.0);
                }
            }
        }
        // each row peaks at the integer bin nearest its center
        for (row, w) in bank.weights.iter().enumerate() {
            let peak = argmax_bin(w);
            let center = bank.boundaries[row + 1];
            assert!((peak as f64 - center).abs() <= 1.0, "row {row}");
        }
    }

    #[test]
    fn log_energies_floor_and_area() {
        let cfg = MfccConfig::default();
        let bank = build_filterbank::<f64>(&cfg).unwrap();
        let s = log_mel_energies(&vec![0.0; 1025], &bank, 1e-10).unwrap();
        assert!(s.iter().all(|&v| v == 1e-10f64.ln()));
        let s = log_mel_energies(&vec![1.0; 1025], &bank, 1e-10).unwrap();
        for (row, &v) in bank.weights.iter().zip(&s) {
            let area: f64 = row.iter().sum();
            assert!((v - area.ln()).abs() < 1e-12);
        }
        assert!(log_mel_energies(&[1.0; 10], &bank, 1e-10).is_err());
    }

    #[test]
    fn dct_examples() {
        let c = dct_ii(&[2.5f64; 40], 40).unwrap();
        assert!((c[0] - 100.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
        let c = dct_ii(&[1.0f64, -1.0], 2).unwrap();
        assert!(c[0].abs() < 1e-15);
        assert!((c[1] - 2f64.sqrt()).abs() < 1e-12);
        assert!(dct_ii(&[1.0f64], 2).is_err());
    }

    #[test]
    fn frame_count_and_silence() {
        let cfg = MfccConfig::default();
        assert_eq!(cfg.frame_count(60 * 22_050), 2584);
        let ex = MfccExtractor::<f64>::new(cfg.clone()).unwrap();
        let silent = AudioBuffer::mono(vec![0.0; 5000], 22_050);
        let frames = ex.frames(&silent).unwrap();
        assert_eq!(frames.len(), 10);
        let floor = 40.0 * 1e-10f64.ln();
        for f in &frames {
            assert!((f[0] - floor).abs() < 1e-9);
            assert!(f[1..].iter().all(|v| v.abs() < 1e-9));
        }
        let tiny = AudioBuffer::mono(vec![0.0; 511], 22_050);
        assert_eq!(
            ex.frames(&tiny),
            Err(MfccError::EmptySegment { samples: 511, hop: 512 })
        );
        let wrong_rate = AudioBuffer::mono(vec![0.0; 5000], 44_100);
        assert!(matches!(
            ex.frames(&wrong_rate),
            Err(MfccError::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn aggregate_mean() {
        let one = aggregate_features(&[vec![1.0f64, 2.0]], "a").unwrap();
        assert_eq!(one.values, vec![1.0, 2.0]);
        let two = aggregate_features(&[vec![0.0f64, 0.0], vec![2.0, 4.0]], "a").unwrap();
        assert_eq!(two.values, vec![1.0, 2.0]);
        assert!(aggregate_features::<f64>(&[], "a").is_err());
    }

    #[test]
    fn correlation_examples() {
        let rows: Vec<FeatureVector> = (0..10)
            .map(|i| {
                let x = (i * i % 7) as f64;
                let y = (i * 3 % 5) as f64;
                FeatureVector {
                    source_id: i.to_string(),
                    values: vec![x, x, -x, y],
                }
            })
            .collect();
        let c = feature_correlation(&rows).unwrap();
        for i in 0..4 {
            assert_eq!(c[i][i], 1.0);
        }
        assert!((c[0][1] - 1.0).abs() < 1e-12);
        assert!((c[0][2] + 1.0).abs() < 1e-12);
        let csv = correlation_csv(&c);
        assert!(csv.starts_with("feature,c0,c1,c2,c3\nc0,1,"));

        let constant: Vec<FeatureVector> = (0..3)
            .map(|i| FeatureVector {
                source_id: i.to_string(),
                values: vec![i as f64, 5.0],
            })
            .collect();
        assert_eq!(
            feature_correlation(&constant),
            Err(MfccError::ZeroVariance { feature: 1 })
        );
    }

    #[test]
    fn config_validation() {
        assert!(MfccConfig::default().validate().is_ok());
        for bad in [
            MfccConfig { fft_size: 1000, ..MfccConfig::default() },
            MfccConfig { hop: 0, ..MfccConfig::default() },
            MfccConfig { hop: 4096, ..MfccConfig::default() },
            MfccConfig { n_coeffs: 41, ..MfccConfig::default() },
            MfccConfig { f_high: 20_000.0, ..MfccConfig::default() },
            MfccConfig { log_floor: 0.0, ..MfccConfig::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert_eq!(MfccConfig::default().fingerprint().len(), 64);
        assert_ne!(
            MfccConfig::default().fingerprint(),
            MfccConfig { hop: 256, ..MfccConfig::default() }.fingerprint()
        );
    }
}
