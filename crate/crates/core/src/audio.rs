//! WAV ingestion, channel mixdown, resampling and segment cutting.
//!
//! Everything downstream assumes mono audio at [`CANONICAL_RATE`]; use
//! [`canonicalize`] to get there from an arbitrary decoded file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

/// Internal sample rate (Hz) used by the feature pipeline.
pub const CANONICAL_RATE: u32 = 22_050;

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding (format tag {format_tag:#06x}, {bits} bits per sample)")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
    #[error("truncated WAV data: header declares {declared} bytes, {available} present")]
    TruncatedData { declared: usize, available: usize },
    #[error("segment start {start_s}s is beyond the end of a {duration_s}s file")]
    StartBeyondEnd { start_s: f64, duration_s: f64 },
    #[error("invalid segment plan: {0}")]
    InvalidPlan(String),
}

/// Interleaved sample buffer. Mono buffers have `channels == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    pub samples: Vec<T>,
    pub channels: u16,
    pub sample_rate: u32,
}

impl<T: Real> AudioBuffer<T> {
    pub fn mono(samples: Vec<T>, sample_rate: u32) -> Self {
        Self {
            samples,
            channels: 1,
            sample_rate,
        }
    }

    /// Builds an interleaved buffer from per-channel sample vectors of equal length.
    pub fn from_channels(channels: &[Vec<T>], sample_rate: u32) -> Self {
        let n_channels = channels.len().max(1);
        let frames = channels.first().map_or(0, Vec::len);
        let mut samples = Vec::with_capacity(frames * n_channels);
        for frame in 0..frames {
            for channel in channels {
                samples.push(channel[frame]);
            }
        }
        Self {
            samples,
            channels: n_channels as u16,
            sample_rate,
        }
    }

    /// Number of frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / usize::from(self.channels.max(1))
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / f64::from(self.sample_rate)
    }

    pub fn channel(&self, index: usize) -> Vec<T> {
        let stride = usize::from(self.channels);
        self.samples.iter().skip(index).step_by(stride).copied().collect()
    }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

#[derive(Debug, Clone, Copy)]
struct WavFormat {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes a little-endian RIFF/WAVE file (PCM16, PCM24 or float32).
///
/// Integer PCM is scaled by `1 / 2^(bits-1)`, so the most negative code maps
/// to exactly -1.0. Channels stay interleaved; see [`to_mono`].
pub fn decode_wav<T: Real>(bytes: &[u8]) -> Result<AudioBuffer<T>, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::MalformedHeader(format!(
            "{} bytes is shorter than a RIFF header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader("missing RIFF/WAVE magic".into()));
    }

    let mut format: Option<WavFormat> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(AudioError::MalformedHeader("short fmt chunk".into()));
                }
                let mut format_tag = read_u16(bytes, body);
                let channels = read_u16(bytes, body + 2);
                let sample_rate = read_u32(bytes, body + 4);
                let bits = read_u16(bytes, body + 14);
                if format_tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(AudioError::MalformedHeader(
                            "short WAVE_FORMAT_EXTENSIBLE chunk".into(),
                        ));
                    }
                    // first two bytes of the sub-format GUID carry the real tag
                    format_tag = read_u16(bytes, body + 24);
                }
                if channels == 0 || sample_rate == 0 {
                    return Err(AudioError::MalformedHeader(
                        "zero channels or zero sample rate".into(),
                    ));
                }
                format = Some(WavFormat {
                    format_tag,
                    channels,
                    sample_rate,
                    bits,
                });
            }
            b"data" => {
                let format = format.ok_or_else(|| {
                    AudioError::MalformedHeader("data chunk precedes fmt chunk".into())
                })?;
                let available = bytes.len() - body;
                if size > available {
                    return Err(AudioError::TruncatedData {
                        declared: size,
                        available,
                    });
                }
                return decode_samples(&bytes[body..body + size], format);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    Err(AudioError::MalformedHeader(match format {
        Some(_) => "no data chunk".into(),
        None => "no fmt chunk".into(),
    }))
}

fn decode_samples<T: Real>(data: &[u8], format: WavFormat) -> Result<AudioBuffer<T>, AudioError> {
    let width = match (format.format_tag, format.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (format_tag, bits) => return Err(AudioError::UnsupportedEncoding { format_tag, bits }),
    };
    let block = width * usize::from(format.channels);
    if !data.len().is_multiple_of(block) {
        let whole = data.len() / block * block;
        return Err(AudioError::TruncatedData {
            declared: whole + block,
            available: data.len(),
        });
    }
    let samples: Vec<T> = match width {
        2 => data
            .chunks_exact(2)
            .map(|c| T::of(f64::from(i16::from_le_bytes([c[0], c[1]])) / 32_768.0))
            .collect(),
        3 => data
            .chunks_exact(3)
            .map(|c| {
                // sign-extend through the top byte of an i32
                let v = i32::from_le_bytes([0, c[0], c[1], c[2]]) >> 8;
                T::of(f64::from(v) / 8_388_608.0)
            })
            .collect(),
        _ => data
            .chunks_exact(4)
            .map(|c| T::of(f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))))
            .collect(),
    };
    Ok(AudioBuffer {
        samples,
        channels: format.channels,
        sample_rate: format.sample_rate,
    })
}

/// Encodes a buffer as 16-bit PCM WAV. Samples are clamped to the code range.
pub fn encode_wav_pcm16<T: Real>(buffer: &AudioBuffer<T>) -> Vec<u8> {
    let data_len = buffer.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    let channels = buffer.channels.max(1);
    let block_align = channels * 2;
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buffer.samples {
        let code = (s.as_f64() * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

/// Per-frame arithmetic mean of all channels. Mono input comes back unchanged.
pub fn to_mono<T: Real>(buffer: &AudioBuffer<T>) -> AudioBuffer<T> {
    if buffer.channels <= 1 {
        return buffer.clone();
    }
    let n = usize::from(buffer.channels);
    let scale = T::one() / T::of_usize(n);
    let samples = buffer
        .samples
        .chunks_exact(n)
        .map(|frame| frame.iter().copied().sum::<T>() * scale)
        .collect();
    AudioBuffer::mono(samples, buffer.sample_rate)
}

/// Linear-interpolation resampling.
///
/// Output frame `i` sits at source position `i * source / target`; the
/// interpolant holds the last input sample past the end of the buffer.
/// Output length is `floor(frames * target / source)`.
pub fn resample<T: Real>(buffer: &AudioBuffer<T>, target_rate: u32) -> AudioBuffer<T> {
    assert!(target_rate > 0, "target rate must be positive");
    if buffer.sample_rate == target_rate {
        return buffer.clone();
    }
    let frames = buffer.frames();
    let out_frames =
        (frames as u128 * u128::from(target_rate) / u128::from(buffer.sample_rate)) as usize;
    let n = usize::from(buffer.channels.max(1));
    let step = f64::from(buffer.sample_rate) / f64::from(target_rate);
    let mut samples = Vec::with_capacity(out_frames * n);
    for i in 0..out_frames {
        let pos = i as f64 * step;
        let left = (pos.floor() as usize).min(frames - 1);
        let right = (left + 1).min(frames - 1);
        let frac = T::of(pos - left as f64);
        for c in 0..n {
            let a = buffer.samples[left * n + c];
            let b = buffer.samples[right * n + c];
            samples.push(a + (b - a) * frac);
        }
    }
    AudioBuffer {
        samples,
        channels: buffer.channels,
        sample_rate: target_rate,
    }
}

/// Mixes down to mono and resamples to [`CANONICAL_RATE`].
pub fn canonicalize<T: Real>(buffer: &AudioBuffer<T>) -> AudioBuffer<T> {
    resample(&to_mono(buffer), CANONICAL_RATE)
}

/// One cut of a segment plan, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub start_s: f64,
    pub duration_s: f64,
}

/// Ordered, non-empty list of cuts applied to every file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Cut>", into = "Vec<Cut>")]
pub struct SegmentPlan {
    cuts: Vec<Cut>,
}

impl SegmentPlan {
    pub fn new(cuts: Vec<Cut>) -> Result<Self, AudioError> {
        if cuts.is_empty() {
            return Err(AudioError::InvalidPlan("plan has no cuts".into()));
        }
        for cut in &cuts {
            if !(cut.start_s.is_finite() && cut.start_s >= 0.0) {
                return Err(AudioError::InvalidPlan(format!("bad start {}", cut.start_s)));
            }
            if !(cut.duration_s.is_finite() && cut.duration_s > 0.0) {
                return Err(AudioError::InvalidPlan(format!(
                    "bad duration {}",
                    cut.duration_s
                )));
            }
        }
        Ok(Self { cuts })
    }

    pub fn single(start_s: f64, duration_s: f64) -> Result<Self, AudioError> {
        Self::new(vec![Cut {
            start_s,
            duration_s,
        }])
    }

    /// Two overlapping minutes per file: 0-60 s and 20-80 s.
    pub fn bi_sample() -> Self {
        Self {
            cuts: vec![
                Cut {
                    start_s: 0.0,
                    duration_s: 60.0,
                },
                Cut {
                    start_s: 20.0,
                    duration_s: 60.0,
                },
            ],
        }
    }

    /// The four single-segment baselines: (0,60), (0,90), (20,60), (20,40).
    pub fn baseline_variants() -> [Self; 4] {
        [(0.0, 60.0), (0.0, 90.0), (20.0, 60.0), (20.0, 40.0)].map(|(start_s, duration_s)| Self {
            cuts: vec![Cut {
                start_s,
                duration_s,
            }],
        })
    }

    /// Parses `start:duration[,start:duration...]`, e.g. `0:60,20:60`.
    pub fn parse(text: &str) -> Result<Self, AudioError> {
        let cuts = text
            .split(',')
            .map(|part| {
                let (start, duration) = part.trim().split_once(':').ok_or_else(|| {
                    AudioError::InvalidPlan(format!("expected start:duration, got {part:?}"))
                })?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| AudioError::InvalidPlan(format!("not a number: {s:?}")))
                };
                Ok(Cut {
                    start_s: parse(start)?,
                    duration_s: parse(duration)?,
                })
            })
            .collect::<Result<Vec<_>, AudioError>>()?;
        Self::new(cuts)
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }
}

impl Default for SegmentPlan {
    fn default() -> Self {
        Self::bi_sample()
    }
}

impl TryFrom<Vec<Cut>> for SegmentPlan {
    type Error = AudioError;
    fn try_from(cuts: Vec<Cut>) -> Result<Self, Self::Error> {
        Self::new(cuts)
    }
}

impl From<SegmentPlan> for Vec<Cut> {
    fn from(plan: SegmentPlan) -> Self {
        plan.cuts
    }
}

impl std::fmt::Display for SegmentPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .cuts
            .iter()
            .map(|c| format!("{}:{}", c.start_s, c.duration_s))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// A cut taken from a longer buffer. `short` marks a cut that ran past the end of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub audio: AudioBuffer<T>,
    pub start_s: f64,
    pub duration_s: f64,
    pub short: bool,
}

/// Returns frames `[start_s * rate, (start_s + duration_s) * rate)`, clamped at the end of the file.
pub fn extract_segment<T: Real>(
    buffer: &AudioBuffer<T>,
    start_s: f64,
    duration_s: f64,
) -> Result<Segment<T>, AudioError> {
    let rate = f64::from(buffer.sample_rate);
    let frames = buffer.frames();
    let start = (start_s * rate).floor() as usize;
    if start_s < 0.0 || start >= frames {
        return Err(AudioError::StartBeyondEnd {
            start_s,
            duration_s: buffer.duration_s(),
        });
    }
    let wanted_end = ((start_s + duration_s) * rate).floor() as usize;
    let end = wanted_end.min(frames);
    let n = usize::from(buffer.channels.max(1));
    Ok(Segment {
        audio: AudioBuffer {
            samples: buffer.samples[start * n..end * n].to_vec(),
            channels: buffer.channels,
            sample_rate: buffer.sample_rate,
        },
        start_s,
        duration_s,
        short: end < wanted_end,
    })
}

/// Cuts one segment per plan entry, in plan order.
pub fn bi_sample<T: Real>(
    buffer: &AudioBuffer<T>,
    plan: &SegmentPlan,
) -> Result<Vec<Segment<T>>, AudioError> {
    plan.cuts()
        .iter()
        .map(|cut| extract_segment(buffer, cut.start_s, cut.duration_s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_mono(codes: &[i16], rate: u32) -> Vec<u8> {
        let buffer = AudioBuffer::mono(
            codes.iter().map(|&c| f64::from(c) / 32_768.0).collect(),
            rate,
        );
        encode_wav_pcm16(&buffer)
    }

    #[test]
    fn decodes_pcm16_scaling() {
        let bytes = pcm16_mono(&[0, 16_384, -16_384], 8_000);
        let buffer: AudioBuffer<f64> = decode_wav(&bytes).unwrap();
        assert_eq!(buffer.samples, vec![0.0, 0.5, -0.5]);
        assert_eq!(buffer.sample_rate, 8_000);
        assert_eq!(buffer.channels, 1);
    }

    fn hound_file<S: hound::Sample + Copy>(spec: hound::WavSpec, samples: &[S]) -> Vec<u8> {
        let mut cursor = std::io::Cursor::new(Vec::new());
        let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        cursor.into_inner()
    }

    #[test]
    fn agrees_with_reference_writer() {
        let spec = |bits, format| hound::WavSpec {
            channels: 2,
            sample_rate: 44_100,
            bits_per_sample: bits,
            sample_format: format,
        };
        let codes16: Vec<i16> = vec![0, -32_768, 32_767, 1234, -5, 77];
        let a = decode_wav::<f64>(&hound_file(spec(16, hound::SampleFormat::Int), &codes16)).unwrap();
        assert_eq!((a.channels, a.sample_rate, a.frames()), (2, 44_100, 3));
        for (got, &c) in a.samples.iter().zip(&codes16) {
            assert_eq!(*got, f64::from(c) / 32_768.0);
        }

        let codes24: Vec<i32> = vec![-8_388_608, 8_388_607, 0, 42];
        let b = decode_wav::<f64>(&hound_file(spec(24, hound::SampleFormat::Int), &codes24)).unwrap();
        for (got, &c) in b.samples.iter().zip(&codes24) {
            assert_eq!(*got, f64::from(c) / 8_388_608.0);
        }

        let floats: Vec<f32> = vec![0.25, -1.0, 0.999, -0.5];
        let c = decode_wav::<f32>(&hound_file(spec(32, hound::SampleFormat::Float), &floats)).unwrap();
        assert_eq!(c.samples, floats);
    }

    #[test]
    fn riff_only_is_malformed() {
        assert!(matches!(
            decode_wav::<f64>(b"RIFF"),
            Err(AudioError::MalformedHeader(_))
        ));
        let mut bytes = pcm16_mono(&[1, 2], 8_000);
        bytes[8..12].copy_from_slice(b"AVI ");
        assert!(matches!(
            decode_wav::<f64>(&bytes),
            Err(AudioError::MalformedHeader(_))
        ));
    }

    #[test]
    fn truncated_payload_is_reported() {
        let mut bytes = pcm16_mono(&[1, 2, 3, 4], 8_000);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            decode_wav::<f64>(&bytes),
            Err(AudioError::TruncatedData { declared: 8, available: 5 })
        ));
    }

    #[test]
    fn compressed_encodings_are_rejected() {
        let mut bytes = pcm16_mono(&[1, 2], 8_000);
        // format tag 0x0055 = MPEG layer 3
        bytes[20..22].copy_from_slice(&0x0055u16.to_le_bytes());
        assert_eq!(
            decode_wav::<f64>(&bytes),
            Err(AudioError::UnsupportedEncoding {
                format_tag: 0x0055,
                bits: 16
            })
        );
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = pcm16_mono(&[100, -100], 8_000);
        let mut bytes = plain[..12].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]); // odd size plus pad byte
        bytes.extend_from_slice(&plain[12..]);
        let decoded: AudioBuffer<f64> = decode_wav(&bytes).unwrap();
        assert_eq!(decoded.samples, vec![100.0 / 32_768.0, -100.0 / 32_768.0]);
    }

    #[test]
    fn to_mono_means_channels() {
        let b = AudioBuffer::from_channels(&[vec![1.0], vec![-1.0]], 10);
        assert_eq!(to_mono(&b).samples, vec![0.0]);
        let b = AudioBuffer::from_channels(&[vec![0.2, 0.4], vec![0.6, 0.0]], 10);
        let m = to_mono(&b);
        assert!((m.samples[0] - 0.4f64).abs() < 1e-15);
        assert!((m.samples[1] - 0.2f64).abs() < 1e-15);
        let mono = AudioBuffer::mono(vec![0.25, 0.5], 10);
        assert_eq!(to_mono(&mono), mono);
    }

    #[test]
    fn resample_identity_and_upsample() {
        let b = AudioBuffer::mono(vec![0.0, 1.0, 0.0, -1.0], 4);
        assert_eq!(resample(&b, 4), b);

        // t = 0, 0.25, 0.5, 0.75 s; the last point holds the final sample
        let b = AudioBuffer::mono(vec![0.0, 1.0], 2);
        let up = resample(&b, 4);
        assert_eq!(up.samples, vec![0.0, 0.5, 1.0, 1.0]);
        assert_eq!(up.sample_rate, 4);

        let c = AudioBuffer::mono(vec![0.3f64; 441], 44_100);
        let down = resample(&c, 22_050);
        assert_eq!(down.samples.len(), 220);
        assert!(down.samples.iter().all(|&s| (s - 0.3).abs() < 1e-15));
    }

    #[test]
    fn segment_cuts() {
        let rate = 100;
        let b = AudioBuffer::mono((0..120 * rate).map(|i| i as f64).collect(), rate as u32);
        let s = extract_segment(&b, 0.0, 60.0).unwrap();
        assert_eq!(s.audio.frames(), 60 * rate);
        assert!(!s.short);
        let s = extract_segment(&b, 20.0, 60.0).unwrap();
        assert_eq!(s.audio.samples[0], (20 * rate) as f64);
        assert_eq!(s.audio.frames(), 60 * rate);

        let b = AudioBuffer::mono(vec![0.0f64; 30 * rate], rate as u32);
        let s = extract_segment(&b, 20.0, 60.0).unwrap();
        assert!(s.short);
        assert_eq!(s.audio.frames(), 10 * rate);
        assert!(matches!(
            extract_segment(&b, 30.0, 1.0),
            Err(AudioError::StartBeyondEnd { .. })
        ));
    }

    #[test]
    fn bi_sample_default_plan() {
        let rate = 50;
        let b = AudioBuffer::mono((0..90 * rate).map(|i| i as f64).collect(), rate as u32);
        let segs = bi_sample(&b, &SegmentPlan::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].audio.samples.first(), Some(&0.0));
        assert_eq!(segs[0].audio.samples.last(), Some(&((60 * rate - 1) as f64)));
        assert_eq!(segs[1].audio.samples.first(), Some(&((20 * rate) as f64)));
        assert_eq!(segs[1].audio.samples.last(), Some(&((80 * rate - 1) as f64)));

        let single = SegmentPlan::single(0.0, 10.0).unwrap();
        assert_eq!(bi_sample(&b, &single).unwrap().len(), 1);
    }

    #[test]
    fn plan_parsing_and_validation() {
        let plan = SegmentPlan::parse("0:60, 20:60").unwrap();
        assert_eq!(plan, SegmentPlan::bi_sample());
        assert_eq!(plan.to_string(), "0:60,20:60");
        assert!(SegmentPlan::parse("0:0").is_err());
        assert!(SegmentPlan::parse("").is_err());
        assert!(SegmentPlan::new(vec![]).is_err());
        let json = serde_json::to_string(&plan).unwrap();
        let back: SegmentPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
        assert!(serde_json::from_str::<SegmentPlan>("[]").is_err());
    }
}
