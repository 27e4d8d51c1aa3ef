use empath_core::audio::{read_wav, resample_linear, write_wav, AudioClip, AudioError};
use empath_core::features::{fft_real, power_spectrum};
use proptest::prelude::*;

proptest! {
    #[test]
    fn wav_round_trip_within_one_step(
        samples in prop::collection::vec(-1.0f64..=1.0, 1..2000),
        rate in 1u32..96_000,
    ) {
        let clip = AudioClip::new(samples, rate).unwrap();
        let back = read_wav(&write_wav(&clip)).unwrap();
        prop_assert_eq!(back.sample_rate(), rate);
        prop_assert_eq!(back.len(), clip.len());
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn truncated_files_are_rejected(cut in 1usize..44) {
        let bytes = write_wav(&AudioClip::new(vec![0.25; 8], 16_000).unwrap());
        let err = read_wav(&bytes[..bytes.len() - cut]).unwrap_err();
        prop_assert!(matches!(err, AudioError::MalformedContainer(_)));
    }
}

#[test]
fn one_second_random_clip() {
    let samples: Vec<f64> = (0..16_000).map(|i| ((i as f64 * 0.731).sin() * 1.3).clamp(-1.0, 1.0)).collect();
    let clip = AudioClip::new(samples, 16_000).unwrap();
    let back = read_wav(&write_wav(&clip)).unwrap();
    let worst = clip
        .samples()
        .iter()
        .zip(back.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1.0 / 32768.0, "{worst}");
}

#[test]
fn resampled_sine_keeps_its_peak() {
    let src_rate = 44_100.0;
    let samples: Vec<f64> = (0..44_100)
        .map(|n| 0.8 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / src_rate).sin())
        .collect();
    let clip = AudioClip::new(samples, 44_100).unwrap();
    let down = resample_linear(&clip, 16_000).unwrap();
    assert_eq!(down.len(), 16_000);
    let n = 16_384;
    let frame: Vec<f64> = down.samples()[..n.min(down.len())]
        .iter()
        .copied()
        .chain(std::iter::repeat(0.0))
        .take(n)
        .collect();
    let power = power_spectrum(&fft_real(&frame).unwrap());
    let peak = (0..power.len()).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    let bin_hz = 16_000.0 / n as f64;
    assert!((peak as f64 * bin_hz - 440.0).abs() <= bin_hz, "peak at {} Hz", peak as f64 * bin_hz);
}

#[test]
fn error_taxonomy() {
    assert!(matches!(read_wav(b""), Err(AudioError::MalformedContainer(_))));
    assert!(matches!(read_wav(b"RIFX\x04\0\0\0WAVE"), Err(AudioError::MalformedContainer(_))));

    let mut float = write_wav(&AudioClip::new(vec![0.0; 4], 8000).unwrap());
    float[20] = 3; // IEEE float format tag
    assert!(matches!(read_wav(&float), Err(AudioError::UnsupportedEncoding(_))));

    let mut eight_bit = write_wav(&AudioClip::new(vec![0.0; 4], 8000).unwrap());
    eight_bit[34] = 8;
    assert!(matches!(read_wav(&eight_bit), Err(AudioError::UnsupportedEncoding(_))));

    let empty = AudioClip::new(vec![], 8000).unwrap();
    assert_eq!(resample_linear(&empty, 16_000), Err(AudioError::EmptyClip));
}
