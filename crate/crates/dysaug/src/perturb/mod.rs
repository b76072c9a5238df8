//! Baseline augmentation transforms: WSOLA tempo perturbation, resampling
//! speed perturbation, and speaker-dependent factor estimation from phone
//! alignments.
//!
//! Duration convention used throughout: a factor `alpha < 1` LENGTHENS the
//! output (`output_duration = input_duration / alpha`). Slower target
//! speakers yield factors below one, and the augmented control speech must
//! stretch to match them.

mod align;
mod wsola;

pub use align::{
    parse_alignment_file, parse_alignments, sd_factor, speaker_duration_stats, AlignmentEntry,
    AlignmentRecord, SpeakerDurationStats,
};
pub use wsola::{tempo_perturb, WsolaConfig};

use thiserror::Error;

use crate::dsp::{self, AudioClip, DspError};

pub const MIN_FACTOR: f64 = 0.5;
pub const MAX_FACTOR: f64 = 2.0;

/// Default silence labels; alignments are trusted as-is, so silence is
/// filtered by label rather than re-detected.
pub fn default_silence_labels() -> std::collections::HashSet<String> {
    ["sil", "sp"].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("perturbation factor {0} outside the supported band [0.5, 2.0]")]
    FactorOutOfRange(f64),
    #[error("clip {utterance:?} has {samples} samples, shorter than one {block_len}-sample block")]
    ClipTooShort {
        utterance: String,
        samples: usize,
        block_len: usize,
    },
    #[error("invalid WSOLA config: {0}")]
    BadWsolaConfig(String),
    #[error("no non-silence phones found across {records} alignment records")]
    NoNonSilencePhones { records: usize },
    #[error("empty control speaker list")]
    EmptyControlList,
    #[error("non-positive mean phone duration for speaker {0:?}")]
    NonPositiveDuration(String),
    #[error("frame count must be positive (control={control}, target={target})")]
    ZeroFrames { control: usize, target: usize },
    #[error("alignment parse error at line {line}: {reason}")]
    AlignmentParse { line: usize, reason: String },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Resampling speed perturbation: `y(t) = x(alpha * t)`.
///
/// Both the duration (by `1/alpha`) and the spectral content (by `alpha`)
/// change — the defining contrast with [`tempo_perturb`], which keeps pitch.
pub fn speed_perturb(clip: &AudioClip, alpha: f64) -> Result<AudioClip, PerturbError> {
    if !(MIN_FACTOR..=MAX_FACTOR).contains(&alpha) || !alpha.is_finite() {
        return Err(PerturbError::FactorOutOfRange(alpha));
    }
    Ok(dsp::resample(clip, alpha)?)
}

/// Per-pair duration-matching factor: perturbing the control clip by
/// `control_frames / target_frames` yields the target's duration under the
/// `output = input / alpha` convention.
pub fn pairwise_match_factor(
    control_clip_frames: usize,
    target_clip_frames: usize,
) -> Result<f64, PerturbError> {
    if control_clip_frames == 0 || target_clip_frames == 0 {
        return Err(PerturbError::ZeroFrames {
            control: control_clip_frames,
            target: target_clip_frames,
        });
    }
    Ok(control_clip_frames as f64 / target_clip_frames as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::normalized_correlation;

    fn tone(freq_hz: f64, rate: u32, n: usize, amp: f64) -> AudioClip {
        let samples = (0..n)
            .map(|t| amp * (2.0 * std::f64::consts::PI * freq_hz * t as f64 / rate as f64).sin())
            .collect();
        AudioClip::new(samples, rate)
    }

    fn dominant_frequency(samples: &[f64], rate: u32) -> (f64, f64) {
        let n_fft = samples.len().next_power_of_two().max(2);
        let mut frame = vec![0.0; n_fft];
        let denom = (samples.len() - 1).max(1) as f64;
        for (i, &s) in samples.iter().enumerate() {
            let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos());
            frame[i] = s * w;
        }
        let spec = crate::dsp::fft_real(&frame).unwrap();
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(k, _)| k)
            .unwrap();
        let bin_hz = rate as f64 / n_fft as f64;
        (peak as f64 * bin_hz, bin_hz)
    }

    #[test]
    fn speed_unit_factor_is_near_identity() {
        let clip = tone(440.0, 16000, 8000, 0.5);
        let out = speed_perturb(&clip, 1.0).unwrap();
        assert_eq!(out.len(), clip.len());
        let max_dev = clip
            .samples
            .iter()
            .zip(&out.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 1e-6);
    }

    #[test]
    fn speed_moves_pitch_and_duration_together() {
        let clip = tone(440.0, 16000, 16000, 0.5);
        let out = speed_perturb(&clip, 0.9).unwrap();
        let (peak_hz, bin_hz) = dominant_frequency(&out.samples, 16000);
        assert!((peak_hz - 396.0).abs() <= bin_hz);
        assert!((out.len() as f64 - 16000.0 / 0.9).abs() <= 1.0);
    }

    #[test]
    fn speed_eleven_tenths_shortens_to_909ms() {
        let clip = tone(440.0, 16000, 16000, 0.5);
        let out = speed_perturb(&clip, 1.1).unwrap();
        let expect = (16000.0 / 1.1_f64).round();
        assert!((out.len() as f64 - expect).abs() <= 1.0, "len={}", out.len());
    }

    #[test]
    fn pairwise_factor_arithmetic() {
        assert_eq!(pairwise_match_factor(100, 200).unwrap(), 0.5);
        assert_eq!(pairwise_match_factor(150, 100).unwrap(), 1.5);
        assert_eq!(pairwise_match_factor(70, 70).unwrap(), 1.0);
        assert!(pairwise_match_factor(0, 10).is_err());
        assert!(pairwise_match_factor(10, 0).is_err());
    }

    #[test]
    fn duration_contract_holds_for_both_methods() {
        // |out - in/alpha| / (in/alpha) < 0.02 across the guard band.
        let clip = tone(330.0, 16000, 12000, 0.4);
        let cfg = WsolaConfig::for_sample_rate(16000);
        for alpha in [0.5, 0.8, 0.9, 1.0, 1.1, 1.5, 2.0] {
            let want = clip.len() as f64 / alpha;
            let sp = speed_perturb(&clip, alpha).unwrap();
            assert!(
                (sp.len() as f64 - want).abs() / want < 0.02,
                "speed alpha={alpha} len={}",
                sp.len()
            );
            let tp = tempo_perturb(&clip, alpha, &cfg).unwrap();
            assert!(
                (tp.len() as f64 - want).abs() / want < 0.02,
                "tempo alpha={alpha} len={}",
                tp.len()
            );
        }
    }

    #[test]
    fn pitch_contrast_between_tempo_and_speed() {
        // Tempo keeps the tone within 1%; speed moves it to alpha*f0 within a bin.
        let clip = tone(440.0, 16000, 16000, 0.5);
        let cfg = WsolaConfig::for_sample_rate(16000);
        let alpha = 0.9;

        let tp = tempo_perturb(&clip, alpha, &cfg).unwrap();
        let (tp_hz, _) = dominant_frequency(&tp.samples, 16000);
        assert!((tp_hz - 440.0).abs() / 440.0 < 0.01, "tempo peak {tp_hz}");

        let sp = speed_perturb(&clip, alpha).unwrap();
        let (sp_hz, bin_hz) = dominant_frequency(&sp.samples, 16000);
        assert!((sp_hz - 396.0).abs() <= bin_hz, "speed peak {sp_hz}");
    }

    #[test]
    fn tempo_unit_factor_preserves_signal() {
        let clip = tone(440.0, 16000, 16000, 0.5);
        let cfg = WsolaConfig::for_sample_rate(16000);
        let out = tempo_perturb(&clip, 1.0, &cfg).unwrap();
        assert!((out.len() as i64 - clip.len() as i64).unsigned_abs() as usize <= cfg.block_len);
        let ncc = normalized_correlation(&clip.samples, &out.samples);
        assert!(ncc > 0.95, "ncc={ncc}");
    }

    #[test]
    fn tempo_stretches_without_moving_pitch() {
        let clip = tone(440.0, 16000, 16000, 0.5);
        let cfg = WsolaConfig::for_sample_rate(16000);
        let out = tempo_perturb(&clip, 0.8, &cfg).unwrap();
        let want = 16000.0 / 0.8;
        assert!((out.len() as f64 - want).abs() / want < 0.02);
        let (peak_hz, _) = dominant_frequency(&out.samples, 16000);
        assert!((peak_hz - 440.0).abs() / 440.0 < 0.01, "peak={peak_hz}");
    }

    #[test]
    fn tempo_accepts_global_factor_set() {
        let clip = tone(250.0, 16000, 8000, 0.4);
        let cfg = WsolaConfig::for_sample_rate(16000);
        for alpha in [0.9, 1.0, 1.1] {
            assert!(tempo_perturb(&clip, alpha, &cfg).is_ok());
        }
    }

    #[test]
    fn tempo_guard_rails() {
        let cfg = WsolaConfig::for_sample_rate(16000);
        let short = tone(440.0, 16000, cfg.block_len - 1, 0.5);
        assert!(matches!(
            tempo_perturb(&short, 1.0, &cfg),
            Err(PerturbError::ClipTooShort { .. })
        ));
        let clip = tone(440.0, 16000, 8000, 0.5);
        assert!(matches!(
            tempo_perturb(&clip, 0.3, &cfg),
            Err(PerturbError::FactorOutOfRange(_))
        ));
        assert!(matches!(
            tempo_perturb(&clip, 2.4, &cfg),
            Err(PerturbError::FactorOutOfRange(_))
        ));
    }

    #[test]
    fn wsola_output_never_clips() {
        // Full-scale input stays within [-1, 1] after overlap normalization.
        let mut clip = tone(440.0, 16000, 12000, 1.0);
        for (i, s) in clip.samples.iter_mut().enumerate() {
            // Add some broadband structure so block alignment is non-trivial.
            *s = (*s * 0.7 + 0.3 * (0.013 * i as f64).sin()).clamp(-1.0, 1.0);
        }
        let cfg = WsolaConfig::for_sample_rate(16000);
        for alpha in [0.5, 0.77, 1.0, 1.31, 2.0] {
            let out = tempo_perturb(&clip, alpha, &cfg).unwrap();
            let peak = out.samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
            assert!(peak <= 1.0 + 1e-12, "alpha={alpha} peak={peak}");
        }
    }
}
