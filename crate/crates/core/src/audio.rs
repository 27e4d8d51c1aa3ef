//! PCM 16-bit WAV decoding/encoding and linear resampling.
//!
//! Everything downstream works on mono [`AudioClip`]s with samples in `[-1, 1]`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AudioError {
    #[error("malformed WAV container: {0}")]
    MalformedContainer(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio clip has no samples")]
    EmptyClip,
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
}

/// Mono PCM samples in `[-1.0, 1.0]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting non-finite samples, samples outside `[-1, 1]`
    /// and a zero sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(pos) = samples
            .iter()
            .position(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(AudioError::InvalidClip(format!(
                "sample {pos} is {} (must be finite and within [-1, 1])",
                samples[pos]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a clip, clamping every sample into `[-1, 1]` (NaN becomes 0).
    pub fn from_clamped(samples: impl IntoIterator<Item = f64>, sample_rate: u32) -> Result<Self, AudioError> {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

const PCM_FORMAT: u16 = 1;
const EXTENSIBLE_FORMAT: u16 = 0xFFFE;

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedContainer(format!(
            "fmt chunk is {} bytes, need at least 16",
            body.len()
        )));
    }
    let mut format = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits_per_sample = u16_at(body, 14);
    // WAVE_FORMAT_EXTENSIBLE carries the real format tag in its sub-format GUID.
    if format == EXTENSIBLE_FORMAT && body.len() >= 26 {
        format = u16_at(body, 24);
    }
    if format != PCM_FORMAT {
        return Err(AudioError::UnsupportedEncoding(format!(
            "format tag {format:#06x} is not integer PCM"
        )));
    }
    if bits_per_sample != 16 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{bits_per_sample}-bit samples (only 16-bit PCM is supported)"
        )));
    }
    if channels == 0 || channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{channels} channels (only mono and stereo are supported)"
        )));
    }
    if sample_rate == 0 {
        return Err(AudioError::MalformedContainer("sample rate is zero".into()));
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
        bits_per_sample,
    })
}

/// Decodes a RIFF/WAVE PCM 16-bit file (mono or stereo) into a mono clip.
///
/// Stereo frames are averaged; integer samples are divided by 32768.
/// Chunks other than `fmt ` and `data` are skipped.
pub fn read_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::MalformedContainer("shorter than a RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedContainer("missing RIFF/WAVE magic".into()));
    }
    let riff_len = u32_at(bytes, 4) as usize;
    if riff_len < 4 || riff_len + 8 > bytes.len() {
        return Err(AudioError::MalformedContainer(format!(
            "RIFF size {riff_len} does not match {} available bytes",
            bytes.len()
        )));
    }
    let end = riff_len + 8;

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= end {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= end)
            .ok_or_else(|| {
                AudioError::MalformedContainer(format!(
                    "chunk {:?} of size {size} overruns the container",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedContainer("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedContainer("missing data chunk".into()))?;
    let frame_bytes = fmt.channels as usize * (fmt.bits_per_sample as usize / 8);
    if data.len() % frame_bytes != 0 {
        return Err(AudioError::MalformedContainer(format!(
            "data chunk of {} bytes is not a whole number of {frame_bytes}-byte frames",
            data.len()
        )));
    }

    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
                .sum();
            sum / fmt.channels as f64
        })
        .collect();
    AudioClip::new(samples, fmt.sample_rate)
}

/// Encodes a clip as a mono PCM 16-bit WAV file.
///
/// Samples are clamped to `[-1, 1]`, scaled by 32768, rounded to nearest and
/// saturated at 32767, so decoding (divide by 32768) is off by at most
/// 1/32768.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().min(32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Linear-interpolation resampler.
///
/// Output sample `i` sits at source position `i * source_rate / target_rate`;
/// positions past the last source sample hold the last value.
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if clip.is_empty() {
        return Err(AudioError::EmptyClip);
    }
    if target_rate == 0 {
        return Err(AudioError::InvalidClip("target rate must be positive".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = &clip.samples;
    let out_len = (src.len() as u64 * target_rate as u64 / clip.sample_rate as u64) as usize;
    let step = clip.sample_rate as f64 / target_rate as f64;
    let last = src.len() - 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let left = pos.floor() as usize;
            if left >= last {
                return src[last];
            }
            let frac = pos - left as f64;
            src[left] + (src[left + 1] - src[left]) * frac
        })
        .collect();
    AudioClip::new(samples, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-assembles a WAV file from interleaved 16-bit samples.
    pub(crate) fn pcm16_wav(channels: u16, rate: u32, samples: &[i16]) -> Vec<u8> {
        let data_len = samples.len() * 2;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn decodes_mono_scaling() {
        let clip = read_wav(&pcm16_wav(1, 16000, &[0, 16384, -32768])).unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(clip.sample_rate(), 16000);
    }

    #[test]
    fn stereo_downmix_is_mean_and_symmetric() {
        let clip = read_wav(&pcm16_wav(2, 8000, &[1000, 3000])).unwrap();
        assert_eq!(clip.samples(), &[0.06103515625]);
        let swapped = read_wav(&pcm16_wav(2, 8000, &[3000, 1000])).unwrap();
        assert_eq!(clip, swapped);
    }

    #[test]
    fn write_clamps_and_zero_round_trips() {
        let zero = write_wav(&AudioClip::new(vec![0.0], 16000).unwrap());
        assert_eq!(&zero[44..], &[0, 0]);
        let clip = AudioClip { samples: vec![2.0, -3.0], sample_rate: 16000 };
        let bytes = write_wav(&clip);
        assert_eq!(i16::from_le_bytes([bytes[44], bytes[45]]), 32767);
        assert_eq!(i16::from_le_bytes([bytes[46], bytes[47]]), -32768);
    }

    #[test]
    fn near_full_scale_stays_within_one_step() {
        // 32767 * x lands just under a rounding midpoint here
        let x = 32766.4999 / 32767.0;
        for s in [x, -x, 1.0, -1.0, 0.999_99, 0.5 / 32768.0] {
            let back = read_wav(&write_wav(&AudioClip::new(vec![s], 8000).unwrap())).unwrap();
            assert!((back.samples()[0] - s).abs() <= 1.0 / 32768.0, "{s}");
        }
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = pcm16_wav(1, 16000, &[5, -5]);
        let mut with_list = plain[..12].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]); // odd size plus pad byte
        with_list.extend_from_slice(&plain[12..]);
        let riff = (with_list.len() - 8) as u32;
        with_list[4..8].copy_from_slice(&riff.to_le_bytes());
        assert_eq!(read_wav(&with_list).unwrap(), read_wav(&plain).unwrap());
    }

    #[test]
    fn rejects_bad_magic_and_sizes() {
        let mut bad = pcm16_wav(1, 16000, &[1, 2]);
        bad[0] = b'X';
        assert!(matches!(read_wav(&bad), Err(AudioError::MalformedContainer(_))));

        let mut truncated = pcm16_wav(1, 16000, &[1, 2, 3]);
        truncated.truncate(truncated.len() - 2);
        assert!(matches!(read_wav(&truncated), Err(AudioError::MalformedContainer(_))));

        assert!(matches!(read_wav(b"RIFF"), Err(AudioError::MalformedContainer(_))));
    }

    #[test]
    fn rejects_non_pcm16() {
        let mut float = pcm16_wav(1, 16000, &[1, 2]);
        float[20..22].copy_from_slice(&3u16.to_le_bytes());
        assert!(matches!(read_wav(&float), Err(AudioError::UnsupportedEncoding(_))));

        let mut eight_bit = pcm16_wav(1, 16000, &[1, 2]);
        eight_bit[34..36].copy_from_slice(&8u16.to_le_bytes());
        assert!(matches!(read_wav(&eight_bit), Err(AudioError::UnsupportedEncoding(_))));
    }

    #[test]
    fn resample_identity_and_hand_case() {
        let clip = AudioClip::new(vec![0.1, -0.2, 0.3], 16000).unwrap();
        assert_eq!(resample_linear(&clip, 16000).unwrap(), clip);

        let two = AudioClip::new(vec![0.0, 1.0], 2).unwrap();
        let up = resample_linear(&two, 4).unwrap();
        assert_eq!(up.samples(), &[0.0, 0.5, 1.0, 1.0]);
        assert_eq!(up.sample_rate(), 4);
    }

    #[test]
    fn resample_rejects_empty() {
        let empty = AudioClip::new(vec![], 16000).unwrap();
        assert_eq!(resample_linear(&empty, 8000), Err(AudioError::EmptyClip));
    }
}
