//! Log-mel spectrogram extraction.
//!
//! Pipeline per frame: Hamming window, zero-pad to `fft_size`, radix-2 FFT,
//! power spectrum, triangular mel filterbank, natural log with an additive
//! floor. The result is padded or truncated to a fixed number of frames so
//! the classifier always sees the same shape.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("FFT size {0} is not a power of two")]
    NonPowerOfTwoSize(usize),
    #[error("too few FFT bins: {bins} bins cannot hold {filters} distinct mel filters")]
    TooFewBins { bins: usize, filters: usize },
    #[error("clip sample rate {clip} Hz does not match feature sample rate {config} Hz")]
    SampleRateMismatch { clip: u32, config: u32 },
    #[error("audio clip has no samples")]
    EmptyClip,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("malformed feature cache: {0}")]
    MalformedCache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub target_frames: usize,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            frame_length: 400,
            hop_length: 160,
            fft_size: 512,
            n_mels: 64,
            f_min: 0.0,
            f_max: 8000.0,
            target_frames: 300,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let fail = |msg: String| Err(FeatureError::InvalidConfig(msg));
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive".into());
        }
        if self.frame_length == 0 || self.frame_length > self.fft_size {
            return fail(format!(
                "frame_length {} must be in 1..=fft_size ({})",
                self.frame_length, self.fft_size
            ));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(FeatureError::NonPowerOfTwoSize(self.fft_size));
        }
        if self.hop_length == 0 {
            return fail("hop_length must be at least 1".into());
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return fail(format!(
                "need 0 <= f_min ({}) < f_max ({}) <= {nyquist}",
                self.f_min, self.f_max
            ));
        }
        if self.n_mels < 2 {
            return fail("n_mels must be at least 2".into());
        }
        if self.target_frames == 0 {
            return fail("target_frames must be at least 1".into());
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail("log_floor must be a small positive constant".into());
        }
        Ok(())
    }

    /// Value written into padded rows and produced by silence.
    pub fn floor_value(&self) -> f64 {
        self.log_floor.ln()
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

/// Row-major `frames x n_mels` matrix of log filterbank energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Vec<f64>,
    frames: usize,
    n_mels: usize,
}

impl MelSpectrogram {
    pub fn from_values(values: Vec<f64>, frames: usize, n_mels: usize) -> Result<Self, FeatureError> {
        if values.len() != frames * n_mels {
            return Err(FeatureError::ShapeMismatch(format!(
                "{} values for a {frames}x{n_mels} spectrogram",
                values.len()
            )));
        }
        Ok(Self {
            values,
            frames,
            n_mels,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.n_mels..(frame + 1) * self.n_mels]
    }

    pub fn get(&self, frame: usize, band: usize) -> f64 {
        self.values[frame * self.n_mels + band]
    }
}

/// `w[k] = 0.54 - 0.46 cos(2 pi k / (n - 1))`, or `[1.0]` when `n == 1`.
pub fn hamming_window(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|k| 0.54 - 0.46 * (2.0 * PI * k as f64 / (n - 1) as f64).cos())
            .collect(),
    }
}

/// Splits `samples` into frames of `frame_length` starting every `hop_length`
/// samples. The final partial frame is zero-padded.
pub fn frame_signal(samples: &[f64], frame_length: usize, hop_length: usize) -> Vec<Vec<f64>> {
    assert!(hop_length >= 1, "hop_length must be at least 1");
    if samples.is_empty() {
        return Vec::new();
    }
    let count = samples.len().saturating_sub(frame_length).div_ceil(hop_length) + 1;
    (0..count)
        .map(|i| {
            let start = i * hop_length;
            let end = (start + frame_length).min(samples.len());
            let mut frame = vec![0.0; frame_length];
            frame[..end - start].copy_from_slice(&samples[start..end]);
            frame
        })
        .collect()
}

/// In-place iterative radix-2 decimation-in-time FFT (no normalization).
fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    if n <= 1 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let angle = -2.0 * PI / len as f64;
        let half = len / 2;
        // per-stage twiddles computed directly to avoid accumulated rounding
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, angle * k as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// One-sided DFT `X[k] = sum_t x[t] e^{-2 pi i k t / N}` for `k = 0..=N/2`.
pub fn fft_real(frame: &[f64]) -> Result<Vec<Complex64>, FeatureError> {
    let n = frame.len();
    if !n.is_power_of_two() {
        return Err(FeatureError::NonPowerOfTwoSize(n));
    }
    let mut buf: Vec<Complex64> = frame.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf);
    buf.truncate(n / 2 + 1);
    Ok(buf)
}

pub fn power_spectrum(spectrum: &[Complex64]) -> Vec<f64> {
    spectrum.iter().map(|c| c.norm_sqr()).collect()
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with edges at `n_mels + 2` mel-equally-spaced points.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// Row-major `n_mels x n_bins`.
    weights: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, filter: usize) -> &[f64] {
        &self.weights[filter * self.n_bins..(filter + 1) * self.n_bins]
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers_hz
    }

    fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = self
                .row(m)
                .iter()
                .zip(power)
                .map(|(w, p)| w * p)
                .sum();
        }
    }
}

/// Builds the filterbank. Each triangle is evaluated at the FFT bin
/// frequencies and rescaled so its largest bin weight is exactly 1.
pub fn mel_filterbank(config: &FeatureConfig) -> Result<MelFilterbank, FeatureError> {
    config.validate()?;
    let n_bins = config.n_bins();
    let n_mels = config.n_mels;
    if n_bins < n_mels + 2 {
        return Err(FeatureError::TooFewBins {
            bins: n_bins,
            filters: n_mels,
        });
    }
    let mel_lo = hz_to_mel(config.f_min);
    let mel_hi = hz_to_mel(config.f_max);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = config.sample_rate as f64 / config.fft_size as f64;

    let mut weights = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut weights[m * n_bins..(m + 1) * n_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            *w = rising.min(falling).max(0.0);
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            // the triangle falls entirely between two FFT bins
            return Err(FeatureError::TooFewBins {
                bins: n_bins,
                filters: n_mels,
            });
        }
        row.iter_mut().for_each(|w| *w /= peak);
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        n_bins,
        centers_hz: edges[1..=n_mels].to_vec(),
    })
}

/// Precomputed window and filterbank for one [`FeatureConfig`]; shareable
/// read-only across threads.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    window: Vec<f64>,
    filterbank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        let filterbank = mel_filterbank(&config)?;
        Ok(Self {
            window: hamming_window(config.frame_length),
            config,
            filterbank,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Log-mel energies for every frame of the clip, before the fixed-length
    /// policy is applied.
    pub fn raw_log_mel(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>, FeatureError> {
        let cfg = &self.config;
        if clip.sample_rate() != cfg.sample_rate {
            return Err(FeatureError::SampleRateMismatch {
                clip: clip.sample_rate(),
                config: cfg.sample_rate,
            });
        }
        if clip.is_empty() {
            return Err(FeatureError::EmptyClip);
        }
        let mut padded = vec![0.0; cfg.fft_size];
        let frames = frame_signal(clip.samples(), cfg.frame_length, cfg.hop_length);
        frames
            .into_iter()
            .map(|frame| {
                padded.fill(0.0);
                for (dst, (x, w)) in padded.iter_mut().zip(frame.iter().zip(&self.window)) {
                    *dst = x * w;
                }
                let power = power_spectrum(&fft_real(&padded)?);
                let mut energies = vec![0.0; cfg.n_mels];
                self.filterbank.apply(&power, &mut energies);
                Ok(energies
                    .into_iter()
                    .map(|e| (e + cfg.log_floor).ln())
                    .collect())
            })
            .collect()
    }

    pub fn log_mel_spectrogram(&self, clip: &AudioClip) -> Result<MelSpectrogram, FeatureError> {
        let rows = self.raw_log_mel(clip)?;
        Ok(pad_or_truncate(rows, &self.config))
    }
}

/// Fixes the frame count: rows past `target_frames` are dropped, missing
/// rows are filled with `ln(log_floor)`.
pub fn pad_or_truncate(rows: Vec<Vec<f64>>, config: &FeatureConfig) -> MelSpectrogram {
    let floor = config.floor_value();
    let mut values = Vec::with_capacity(config.target_frames * config.n_mels);
    for row in rows.into_iter().take(config.target_frames) {
        values.extend(row);
    }
    values.resize(config.target_frames * config.n_mels, floor);
    MelSpectrogram {
        values,
        frames: config.target_frames,
        n_mels: config.n_mels,
    }
}

/// One-shot convenience wrapper around [`FeatureExtractor`].
pub fn log_mel_spectrogram(clip: &AudioClip, config: &FeatureConfig) -> Result<MelSpectrogram, FeatureError> {
    FeatureExtractor::new(config.clone())?.log_mel_spectrogram(clip)
}

/// Per-band mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Identity normalization (mean 0, std 1).
    pub fn identity(n_mels: usize) -> Self {
        Self {
            mean: vec![0.0; n_mels],
            std: vec![1.0; n_mels],
        }
    }

    /// Population statistics over every row of every spectrogram. Bands with
    /// zero spread get std 1.
    pub fn compute(specs: &[MelSpectrogram]) -> Result<Self, FeatureError> {
        let first = specs
            .first()
            .ok_or_else(|| FeatureError::ShapeMismatch("no spectrograms to compute stats over".into()))?;
        let n_mels = first.n_mels;
        let mut sum = vec![0.0; n_mels];
        let mut count = 0usize;
        for spec in specs {
            if spec.n_mels != n_mels {
                return Err(FeatureError::ShapeMismatch(format!(
                    "mixed band counts {} and {}",
                    n_mels, spec.n_mels
                )));
            }
            for f in 0..spec.frames {
                for (s, v) in sum.iter_mut().zip(spec.row(f)) {
                    *s += v;
                }
            }
            count += spec.frames;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; n_mels];
        for spec in specs {
            for f in 0..spec.frames {
                for ((q, v), m) in sq.iter_mut().zip(spec.row(f)).zip(&mean) {
                    *q += (v - m) * (v - m);
                }
            }
        }
        let std = sq
            .iter()
            .map(|q| {
                let s = (q / count as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }
}

/// `(value - mean) / std` per band.
pub fn normalize_features(spec: &MelSpectrogram, stats: &FeatureStats) -> Result<MelSpectrogram, FeatureError> {
    if stats.mean.len() != spec.n_mels || stats.std.len() != spec.n_mels {
        return Err(FeatureError::ShapeMismatch(format!(
            "stats for {}/{} bands applied to {} bands",
            stats.mean.len(),
            stats.std.len(),
            spec.n_mels
        )));
    }
    let values = spec
        .values
        .chunks_exact(spec.n_mels)
        .flat_map(|row| {
            row.iter()
                .zip(&stats.mean)
                .zip(&stats.std)
                .map(|((v, m), s)| {
                    let s = if *s > 0.0 { *s } else { 1.0 };
                    (v - m) / s
                })
        })
        .collect();
    Ok(MelSpectrogram {
        values,
        frames: spec.frames,
        n_mels: spec.n_mels,
    })
}

const CACHE_MAGIC: &[u8; 4] = b"EMPF";
const CACHE_VERSION: u32 = 1;

/// Serializes a spectrogram as a feature cache: 16-byte header (magic,
/// version, frames, bands as little-endian u32) then row-major f32 values.
pub fn write_feature_cache(spec: &MelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + spec.values.len() * 4);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.frames as u32).to_le_bytes());
    out.extend_from_slice(&(spec.n_mels as u32).to_le_bytes());
    for v in &spec.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn read_feature_cache(bytes: &[u8]) -> Result<MelSpectrogram, FeatureError> {
    let bad = |m: &str| FeatureError::MalformedCache(m.to_string());
    if bytes.len() < 16 {
        return Err(bad("shorter than the 16-byte header"));
    }
    if &bytes[0..4] != CACHE_MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    if word(4) != CACHE_VERSION {
        return Err(FeatureError::MalformedCache(format!("unsupported version {}", word(4))));
    }
    let frames = word(8) as usize;
    let n_mels = word(12) as usize;
    let body = &bytes[16..];
    if body.len() != frames * n_mels * 4 {
        return Err(FeatureError::MalformedCache(format!(
            "{} payload bytes for a {frames}x{n_mels} matrix",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    MelSpectrogram::from_values(values, frames, n_mels)
}
