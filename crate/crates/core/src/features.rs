//! Acoustic feature extraction: 16 kHz audio to 64-band log-mel
//! spectrograms, then to the 128-dimensional per-frame feature stack the
//! models consume.
//!
//! Framing is chosen so one acoustic frame lands on each 25 fps video
//! frame: a 40 ms (640-sample) Hann window with a 40 ms hop and no
//! overlap. The magnitude spectrum (1024-point FFT) goes through 64
//! triangular mel filters spanning 0-8000 Hz, followed by log(1+x)
//! compression so silence maps to exactly zero.
//!
//! The default model input is [delta; delta-delta] of the z-scored
//! log-mel bins (64 + 64 = 128); a config switch selects
//! [static; delta] instead, which has the same width.

use std::io::Read;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;
pub const WINDOW_SIZE: usize = 640; // 40 ms at 16 kHz
pub const HOP_SIZE: usize = 640; // no overlap: one frame per video frame
pub const FFT_SIZE: usize = 1024; // next power of two >= WINDOW_SIZE
pub const N_MELS: usize = 64;
pub const FEATURE_DIM: usize = 128;
const MEL_FMIN: f64 = 0.0;
const MEL_FMAX: f64 = 8000.0;
const STD_FLOOR: f64 = 1e-8;

/// Mono 16 kHz waveform.
#[derive(Debug, Clone)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::Audio(format!(
                "expected {SAMPLE_RATE} Hz audio, got {sample_rate} Hz"
            )));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("waveform"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform sample".into()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// T x 64 log-compressed mel-band energies at 25 frames per second.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    frames: Vec<Vec<f64>>,
}

impl MelSpectrogram {
    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n_bins(&self) -> usize {
        N_MELS
    }
}

/// Per-bin mean and standard deviation fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// T x 128 model input features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    frames: Vec<Vec<f64>>,
}

impl FeatureSequence {
    pub fn new(frames: Vec<Vec<f64>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("feature sequence"));
        }
        for row in &frames {
            if row.len() != FEATURE_DIM {
                return Err(Error::ShapeMismatch {
                    context: "feature frame width",
                    expected: FEATURE_DIM,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature frame".into()));
            }
        }
        Ok(FeatureSequence { frames })
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        FEATURE_DIM
    }
}

/// Which 128-wide stack to build from the z-scored log-mel bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureStack {
    /// [delta; delta-delta] (the default reading).
    #[default]
    DeltaDelta,
    /// [static; delta] (same width, alternative reading).
    StaticDelta,
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Edge frequencies (Hz) of the 64 triangular filters: N_MELS + 2 points
/// evenly spaced on the mel scale over [0, 8000] Hz.
fn mel_edges() -> Vec<f64> {
    let lo = hz_to_mel(MEL_FMIN);
    let hi = hz_to_mel(MEL_FMAX);
    (0..N_MELS + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (N_MELS + 1) as f64))
        .collect()
}

/// Center frequency (Hz) of each mel band.
pub fn mel_center_frequencies() -> Vec<f64> {
    let edges = mel_edges();
    (0..N_MELS).map(|m| edges[m + 1]).collect()
}

/// 64 x (FFT_SIZE/2 + 1) triangular filter weights.
fn mel_filterbank() -> Vec<Vec<f64>> {
    let edges = mel_edges();
    let n_freqs = FFT_SIZE / 2 + 1;
    let bin_hz = SAMPLE_RATE as f64 / FFT_SIZE as f64;
    let mut filters = vec![vec![0.0; n_freqs]; N_MELS];
    for m in 0..N_MELS {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for (k, w) in filters[m].iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rising = if center > lo { (f - lo) / (center - lo) } else { 0.0 };
            let falling = if hi > center { (hi - f) / (hi - center) } else { 0.0 };
            *w = rising.min(falling).max(0.0);
        }
    }
    filters
}

fn hann_window(size: usize) -> Vec<f64> {
    (0..size)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / size as f64).cos()))
        .collect()
}

/// Compute the 64-band log-mel spectrogram of a 16 kHz waveform.
///
/// Exactly floor(len / 640) frames are produced; a trailing partial
/// window is dropped. All-zero audio yields all-zero frames.
pub fn mel_spectrogram(w: &Waveform) -> Result<MelSpectrogram> {
    let n_frames = w.samples().len() / HOP_SIZE;
    if n_frames == 0 {
        return Err(Error::Audio(format!(
            "waveform too short: {} samples < one {WINDOW_SIZE}-sample window",
            w.samples().len()
        )));
    }
    let window = hann_window(WINDOW_SIZE);
    let filters = mel_filterbank();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];

    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = t * HOP_SIZE;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < WINDOW_SIZE {
                w.samples()[start + i] * window[i]
            } else {
                0.0
            };
            *slot = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        let n_freqs = FFT_SIZE / 2 + 1;
        let mags: Vec<f64> = buf[..n_freqs].iter().map(|c| c.norm()).collect();
        let row: Vec<f64> = filters
            .iter()
            .map(|filt| {
                let energy: f64 = filt.iter().zip(&mags).map(|(w, m)| w * m).sum();
                energy.ln_1p()
            })
            .collect();
        frames.push(row);
    }
    Ok(MelSpectrogram { frames })
}

/// Per-bin mean/std over all frames of all training spectrograms, in a
/// fixed two-pass order; std floored at 1e-8.
pub fn fit_normalizer(spectrograms: &[MelSpectrogram]) -> Result<FeatureNormalizer> {
    let total: usize = spectrograms.iter().map(|s| s.len()).sum();
    if total == 0 {
        return Err(Error::EmptyInput("normalizer corpus"));
    }
    let n = total as f64;
    let mut mean = vec![0.0; N_MELS];
    for s in spectrograms {
        for frame in s.frames() {
            for (m, v) in mean.iter_mut().zip(frame) {
                *m += v;
            }
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; N_MELS];
    for s in spectrograms {
        for frame in s.frames() {
            for (b, v) in frame.iter().enumerate() {
                let d = v - mean[b];
                var[b] += d * d;
            }
        }
    }
    let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Ok(FeatureNormalizer { mean, std })
}

/// z-score each bin, then stack temporal differences into a 128-wide
/// frame. Delta and delta-delta use zero padding at the sequence start:
/// d_0 = dd_0 = 0.
pub fn featurize(
    s: &MelSpectrogram,
    n: &FeatureNormalizer,
    stack: FeatureStack,
) -> Result<FeatureSequence> {
    if s.is_empty() {
        return Err(Error::EmptyInput("mel spectrogram"));
    }
    if n.mean.len() != N_MELS || n.std.len() != N_MELS {
        return Err(Error::ShapeMismatch {
            context: "normalizer width",
            expected: N_MELS,
            actual: n.mean.len(),
        });
    }
    let t_len = s.len();
    let z: Vec<Vec<f64>> = s
        .frames()
        .iter()
        .map(|frame| {
            frame
                .iter()
                .enumerate()
                .map(|(b, v)| (v - n.mean[b]) / n.std[b])
                .collect()
        })
        .collect();
    let mut delta = vec![vec![0.0; N_MELS]; t_len];
    for t in 1..t_len {
        for b in 0..N_MELS {
            delta[t][b] = z[t][b] - z[t - 1][b];
        }
    }
    let mut delta2 = vec![vec![0.0; N_MELS]; t_len];
    for t in 1..t_len {
        for b in 0..N_MELS {
            delta2[t][b] = delta[t][b] - delta[t - 1][b];
        }
    }
    let frames = (0..t_len)
        .map(|t| {
            let (first, second): (&[f64], &[f64]) = match stack {
                FeatureStack::DeltaDelta => (&delta[t], &delta2[t]),
                FeatureStack::StaticDelta => (&z[t], &delta[t]),
            };
            let mut row = Vec::with_capacity(FEATURE_DIM);
            row.extend_from_slice(first);
            row.extend_from_slice(second);
            row
        })
        .collect();
    FeatureSequence::new(frames)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Read a WAV file: PCM 16-bit, mono, 16 kHz.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let display = path.display().to_string();
    let mut reader =
        hound::WavReader::open(path).map_err(|e| Error::Audio(format!("{display}: {e}")))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Audio(format!(
            "{display}: expected mono audio, got {} channels",
            spec.channels
        )));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Audio(format!(
            "{display}: expected 16-bit PCM, got {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples: Vec<f64> = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Audio(format!("{display}: {e}")))?;
    Waveform::new(samples, spec.sample_rate)
}

/// Write a waveform as 16-bit PCM mono WAV; samples are clamped to [-1, 1].
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let display = path.display().to_string();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| Error::Audio(format!("{display}: {e}")))?;
    for &s in w.samples() {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::Audio(format!("{display}: {e}")))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Audio(format!("{display}: {e}")))
}

const FEATURE_MAGIC: &[u8; 4] = b"HMF1";

/// Write a feature sequence in the binary feature format: magic "HMF1",
/// u32 T, u32 D, then T*D little-endian f32, row-major.
pub fn write_features(path: &Path, f: &FeatureSequence) -> Result<()> {
    let display = path.display().to_string();
    let mut buf = Vec::with_capacity(12 + f.len() * FEATURE_DIM * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&(f.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for row in f.frames() {
        for &v in row {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(&display, e))
}

/// Read a binary feature file.
pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let display = path.display().to_string();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| Error::io(&display, e))?;
    if buf.len() < 12 || &buf[..4] != FEATURE_MAGIC {
        return Err(Error::InvalidValue(format!(
            "{display}: not a feature file (bad magic)"
        )));
    }
    let t = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    if d != FEATURE_DIM {
        return Err(Error::ShapeMismatch {
            context: "feature file width",
            expected: FEATURE_DIM,
            actual: d,
        });
    }
    let expected = 12 + t * d * 4;
    if buf.len() != expected {
        return Err(Error::InvalidValue(format!(
            "{display}: truncated feature file ({} bytes, expected {expected})",
            buf.len()
        )));
    }
    let mut frames = Vec::with_capacity(t);
    let mut off = 12;
    for _ in 0..t {
        let mut row = Vec::with_capacity(d);
        for _ in 0..d {
            let v = f32::from_le_bytes(buf[off..off + 4].try_into().unwrap());
            row.push(f64::from(v));
            off += 4;
        }
        frames.push(row);
    }
    FeatureSequence::new(frames)
}

/// Debug CSV export of a feature sequence.
pub fn write_features_csv(path: &Path, f: &FeatureSequence) -> Result<()> {
    let display = path.display().to_string();
    let mut out = String::new();
    out.push_str("frame");
    for d in 0..FEATURE_DIM {
        out.push_str(&format!(",c{d}"));
    }
    out.push('\n');
    for (t, row) in f.frames().iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(&display, e))
}

/// Store a normalizer as JSON.
pub fn write_normalizer(path: &Path, n: &FeatureNormalizer) -> Result<()> {
    let display = path.display().to_string();
    let json = serde_json::to_string_pretty(n).map_err(|e| Error::json(&display, e))?;
    std::fs::write(path, json).map_err(|e| Error::io(&display, e))
}

pub fn read_normalizer(path: &Path) -> Result<FeatureNormalizer> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let n: FeatureNormalizer =
        serde_json::from_str(&text).map_err(|e| Error::json(&display, e))?;
    if n.mean.len() != N_MELS || n.std.len() != N_MELS {
        return Err(Error::ShapeMismatch {
            context: "normalizer width",
            expected: N_MELS,
            actual: n.mean.len(),
        });
    }
    if n.std.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidValue("normalizer std must be positive".into()));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, seconds: f64) -> Waveform {
        let n = (seconds * SAMPLE_RATE as f64) as usize;
        Waveform::new(
            (0..n)
                .map(|i| {
                    0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / SAMPLE_RATE as f64).sin()
                })
                .collect(),
            SAMPLE_RATE,
        )
        .unwrap()
    }

    #[test]
    fn ten_seconds_gives_250_frames() {
        let w = tone(440.0, 10.0);
        let s = mel_spectrogram(&w).unwrap();
        assert_eq!(s.len(), 250);
        assert_eq!(s.frames()[0].len(), N_MELS);
    }

    #[test]
    fn zero_waveform_gives_zero_spectrogram() {
        let w = Waveform::new(vec![0.0; WINDOW_SIZE * 3], SAMPLE_RATE).unwrap();
        let s = mel_spectrogram(&w).unwrap();
        for frame in s.frames() {
            for &v in frame {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn pure_tone_peaks_in_nearest_band() {
        let w = tone(1000.0, 1.0);
        let s = mel_spectrogram(&w).unwrap();
        let centers = mel_center_frequencies();
        let expected_band = centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 1000.0)
                    .abs()
                    .partial_cmp(&(b.1 - 1000.0).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        for frame in s.frames() {
            let argmax = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            assert_eq!(argmax, expected_band);
        }
    }

    #[test]
    fn wrong_sample_rate_rejected() {
        assert!(Waveform::new(vec![0.0; 100], 44_100).is_err());
    }

    #[test]
    fn too_short_waveform_rejected() {
        let w = Waveform::new(vec![0.1; WINDOW_SIZE - 1], SAMPLE_RATE).unwrap();
        assert!(mel_spectrogram(&w).is_err());
    }

    #[test]
    fn spectrogram_is_deterministic() {
        let w = tone(700.0, 0.6);
        let a = mel_spectrogram(&w).unwrap();
        let b = mel_spectrogram(&w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalizer_constant_corpus() {
        let frames = vec![vec![2.5; N_MELS]; 7];
        let s = MelSpectrogram { frames };
        let n = fit_normalizer(std::slice::from_ref(&s)).unwrap();
        for b in 0..N_MELS {
            assert_eq!(n.mean[b], 2.5);
            assert_eq!(n.std[b], STD_FLOOR);
        }
    }

    #[test]
    fn normalizer_symmetric_values() {
        let frames = vec![vec![-1.0; N_MELS], vec![1.0; N_MELS]];
        let s = MelSpectrogram { frames };
        let n = fit_normalizer(std::slice::from_ref(&s)).unwrap();
        for b in 0..N_MELS {
            assert_eq!(n.mean[b], 0.0);
            assert_eq!(n.std[b], 1.0);
        }
    }

    #[test]
    fn normalizer_recovers_known_moments() {
        let mut rng = crate::seeds::rng(17);
        use rand::Rng;
        // Bin b has mean b/10 and std 0.5 + b/100; use many samples.
        let n_frames = 40_000;
        let frames: Vec<Vec<f64>> = (0..n_frames)
            .map(|_| {
                (0..N_MELS)
                    .map(|b| {
                        let mu = b as f64 / 10.0;
                        let sigma = 0.5 + b as f64 / 100.0;
                        // Uniform with matching moments: mean mu, std sigma.
                        mu + sigma * (rng.random::<f64>() - 0.5) * (12f64).sqrt()
                    })
                    .collect()
            })
            .collect();
        let s = MelSpectrogram { frames };
        let n = fit_normalizer(std::slice::from_ref(&s)).unwrap();
        for b in 0..N_MELS {
            let mu = b as f64 / 10.0;
            let sigma = 0.5 + b as f64 / 100.0;
            assert!((n.mean[b] - mu).abs() < 0.02, "bin {b} mean");
            assert!((n.std[b] - sigma).abs() < 0.02, "bin {b} std");
        }
    }

    #[test]
    fn featurize_constant_spectrogram_is_zero() {
        let frames = vec![vec![1.25; N_MELS]; 9];
        let s = MelSpectrogram { frames };
        let n = fit_normalizer(std::slice::from_ref(&s)).unwrap();
        let f = featurize(&s, &n, FeatureStack::DeltaDelta).unwrap();
        assert_eq!(f.len(), 9);
        for row in f.frames() {
            assert!(row.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn featurize_ramp_differences() {
        // z-scored bins forming 0,1,2,3 give delta 0,1,1,1 and
        // delta-delta 0,1,0,0. Build a spectrogram whose z-scores are
        // exactly that ramp by inverting the normalizer by hand.
        let n = FeatureNormalizer {
            mean: vec![0.0; N_MELS],
            std: vec![1.0; N_MELS],
        };
        let frames: Vec<Vec<f64>> = (0..4).map(|t| vec![t as f64; N_MELS]).collect();
        let s = MelSpectrogram { frames };
        let f = featurize(&s, &n, FeatureStack::DeltaDelta).unwrap();
        let expect_delta = [0.0, 1.0, 1.0, 1.0];
        let expect_dd = [0.0, 1.0, 0.0, 0.0];
        for t in 0..4 {
            for b in 0..N_MELS {
                assert_eq!(f.frames()[t][b], expect_delta[t]);
                assert_eq!(f.frames()[t][N_MELS + b], expect_dd[t]);
            }
        }
    }

    #[test]
    fn featurize_shape_contract() {
        let w = tone(500.0, 0.8);
        let s = mel_spectrogram(&w).unwrap();
        let n = fit_normalizer(std::slice::from_ref(&s)).unwrap();
        for stack in [FeatureStack::DeltaDelta, FeatureStack::StaticDelta] {
            let f = featurize(&s, &n, stack).unwrap();
            assert_eq!(f.len(), s.len());
            assert_eq!(f.frames()[0].len(), FEATURE_DIM);
        }
    }

    #[test]
    fn shift_invariance_with_refit_normalizer() {
        // Random frames keep every bin's std well above the floor, so the
        // z-scores are numerically stable under the shift.
        let mut rng = crate::seeds::rng(29);
        use rand::Rng;
        let frames: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..N_MELS).map(|_| rng.random_range(0.0..4.0)).collect())
            .collect();
        let s = MelSpectrogram { frames };
        let n = fit_normalizer(std::slice::from_ref(&s)).unwrap();
        let f = featurize(&s, &n, FeatureStack::DeltaDelta).unwrap();

        // Add a constant to every frame of bin 7 and refit.
        let mut shifted = s.clone();
        for frame in &mut shifted.frames {
            frame[7] += 3.75;
        }
        let n2 = fit_normalizer(std::slice::from_ref(&shifted)).unwrap();
        let f2 = featurize(&shifted, &n2, FeatureStack::DeltaDelta).unwrap();
        for (a, b) in f.frames().iter().zip(f2.frames()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn feature_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.hmf");
        let frames: Vec<Vec<f64>> = (0..5)
            .map(|t| (0..FEATURE_DIM).map(|d| (t * d) as f64 / 100.0).collect())
            .collect();
        let f = FeatureSequence::new(frames).unwrap();
        write_features(&path, &f).unwrap();
        let g = read_features(&path).unwrap();
        assert_eq!(g.len(), 5);
        // Values survive the f32 round trip at f32 precision.
        for (a, b) in f.frames().iter().zip(g.frames()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= (*x as f32).abs() as f64 * 1e-7 + 1e-9);
            }
        }
        // Magic bytes are the first four bytes.
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"HMF1");
    }

    #[test]
    fn feature_csv_export_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let f = FeatureSequence::new(vec![vec![0.5; FEATURE_DIM]; 3]).unwrap();
        write_features_csv(&path, &f).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("frame,c0,"));
        assert_eq!(lines[0].split(',').count(), 1 + FEATURE_DIM);
        assert!(lines[1].starts_with("0,0.5,"));
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let w = tone(440.0, 0.25);
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path).unwrap();
        assert_eq!(r.samples().len(), w.samples().len());
        for (a, b) in w.samples().iter().zip(r.samples()) {
            assert!((a - b).abs() < 1.0 / 16384.0);
        }
    }

    #[test]
    fn normalizer_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm.json");
        let n = FeatureNormalizer {
            mean: (0..N_MELS).map(|b| b as f64 / 7.0).collect(),
            std: (0..N_MELS).map(|b| 1.0 + b as f64 / 11.0).collect(),
        };
        write_normalizer(&path, &n).unwrap();
        assert_eq!(read_normalizer(&path).unwrap(), n);
    }
}
