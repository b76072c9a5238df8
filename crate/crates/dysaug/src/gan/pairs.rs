//! Training-pair formation: same-word control/target utterances are matched
//! by perturbing the control waveform so its feature length meets the
//! target's, then both sides are trimmed to the common frame count and
//! speaker-level normalized.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::AudioClip;
use crate::features::{
    accumulate_norm_stats, expected_frames, extract_fbank, normalize, FbankConfig, FbankMatrix,
    SpeakerNormStats,
};
use crate::perturb::{
    pairwise_match_factor, speed_perturb, tempo_perturb, WsolaConfig, MAX_FACTOR, MIN_FACTOR,
};

use super::{GanError, TrainingPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMode {
    Tempo,
    Speed,
}

impl PerturbMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbMode::Tempo => "tempo",
            PerturbMode::Speed => "speed",
        }
    }
}

/// One corpus utterance with its audio loaded.
#[derive(Debug, Clone)]
pub struct CorpusUtterance {
    pub utterance_id: String,
    pub speaker_id: String,
    pub word_id: String,
    pub clip: AudioClip,
}

#[derive(Debug, Clone)]
pub struct PairConfig {
    pub mode: PerturbMode,
    /// Full same-word cross products are subsampled down to this many pairs.
    pub max_pairs_per_word: usize,
    pub seed: u64,
    pub fbank: FbankConfig,
}

impl PairConfig {
    pub fn new(mode: PerturbMode) -> Self {
        Self {
            mode,
            max_pairs_per_word: 32,
            seed: 17,
            fbank: FbankConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct PairBuildOutput {
    pub pairs: Vec<TrainingPair>,
    /// Normalization statistics of the perturbed control features, per
    /// control speaker; these are the generation-time source statistics.
    pub control_stats: BTreeMap<String, SpeakerNormStats>,
    pub target_stats: SpeakerNormStats,
    pub unmatched_words: usize,
    pub skipped_pairs: usize,
}

/// Forms duration-matched, speaker-normalized pairs for one target speaker.
pub fn build_pairs(
    control: &[CorpusUtterance],
    target: &[CorpusUtterance],
    cfg: &PairConfig,
) -> Result<PairBuildOutput, GanError> {
    let target_speaker = match target.first() {
        Some(u) => u.speaker_id.clone(),
        None => {
            return Err(GanError::NoPairs {
                unmatched_words: 0,
                skipped_pairs: 0,
            })
        }
    };
    for u in target {
        if u.speaker_id != target_speaker {
            return Err(GanError::MixedTargetSpeakers {
                first: target_speaker,
                other: u.speaker_id.clone(),
            });
        }
    }

    let mut control_by_word: BTreeMap<&str, Vec<&CorpusUtterance>> = BTreeMap::new();
    for u in control {
        control_by_word.entry(&u.word_id).or_default().push(u);
    }
    let mut target_by_word: BTreeMap<&str, Vec<&CorpusUtterance>> = BTreeMap::new();
    for u in target {
        target_by_word.entry(&u.word_id).or_default().push(u);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut unmatched_words = target_by_word
        .keys()
        .filter(|w| !control_by_word.contains_key(*w))
        .count();
    let mut skipped_pairs = 0usize;
    let mut raw: Vec<(FbankMatrix, FbankMatrix, String)> = Vec::new();

    for (&word, controls) in &control_by_word {
        let Some(targets) = target_by_word.get(word) else {
            unmatched_words += 1;
            continue;
        };
        let mut combos: Vec<(usize, usize)> = (0..controls.len())
            .flat_map(|c| (0..targets.len()).map(move |t| (c, t)))
            .collect();
        if combos.len() > cfg.max_pairs_per_word {
            // Seeded partial Fisher-Yates keeps the subsample deterministic.
            for i in 0..cfg.max_pairs_per_word {
                let j = rng.gen_range(i..combos.len());
                combos.swap(i, j);
            }
            combos.truncate(cfg.max_pairs_per_word);
        }

        for (ci, ti) in combos {
            let c = controls[ci];
            let t = targets[ti];
            let rate = c.clip.sample_rate_hz;
            let (Some(tc), Some(tt)) = (
                expected_frames(c.clip.len(), rate, &cfg.fbank),
                expected_frames(t.clip.len(), t.clip.sample_rate_hz, &cfg.fbank),
            ) else {
                skipped_pairs += 1;
                continue;
            };
            let factor = pairwise_match_factor(tc, tt)?;
            if !(MIN_FACTOR..=MAX_FACTOR).contains(&factor) {
                skipped_pairs += 1;
                continue;
            }
            let perturbed = match cfg.mode {
                PerturbMode::Speed => speed_perturb(&c.clip, factor)?,
                PerturbMode::Tempo => {
                    tempo_perturb(&c.clip, factor, &WsolaConfig::for_sample_rate(rate))?
                }
            };
            let mut cf = extract_fbank(&perturbed, &cfg.fbank)?;
            let mut tf = extract_fbank(&t.clip, &cfg.fbank)?;
            // +/- 1 frame of rounding mismatch is absorbed here.
            let common = cf.n_frames.min(tf.n_frames);
            cf.truncate_frames(common);
            tf.truncate_frames(common);
            raw.push((cf, tf, word.to_string()));
        }
    }

    if raw.is_empty() {
        return Err(GanError::NoPairs {
            unmatched_words,
            skipped_pairs,
        });
    }

    // Speaker-level statistics over exactly the features entering training.
    let mut control_groups: BTreeMap<String, Vec<&FbankMatrix>> = BTreeMap::new();
    for (cf, _, _) in &raw {
        control_groups.entry(cf.speaker_id.clone()).or_default().push(cf);
    }
    let mut control_stats = BTreeMap::new();
    for (speaker, mats) in &control_groups {
        control_stats.insert(speaker.clone(), accumulate_norm_stats(mats)?);
    }
    let target_mats: Vec<&FbankMatrix> = raw.iter().map(|(_, tf, _)| tf).collect();
    let target_stats = accumulate_norm_stats(&target_mats)?;

    let mut pairs = Vec::with_capacity(raw.len());
    for (cf, tf, word_id) in &raw {
        pairs.push(TrainingPair {
            control_fbank: normalize(cf, &control_stats[&cf.speaker_id])?,
            target_fbank: normalize(tf, &target_stats)?,
            word_id: word_id.clone(),
        });
    }

    Ok(PairBuildOutput {
        pairs,
        control_stats,
        target_stats,
        unmatched_words,
        skipped_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utterance(utt: &str, speaker: &str, word: &str, n: usize, freq: f64) -> CorpusUtterance {
        let samples = (0..n)
            .map(|t| {
                0.4 * (2.0 * std::f64::consts::PI * freq * t as f64 / 16000.0).sin()
                    + 0.1 * (2.0 * std::f64::consts::PI * 3.1 * freq * t as f64 / 16000.0).sin()
            })
            .collect();
        CorpusUtterance {
            utterance_id: utt.into(),
            speaker_id: speaker.into(),
            word_id: word.into(),
            clip: AudioClip::new(samples, 16000).with_ids(speaker, utt),
        }
    }

    /// Clip length that yields exactly `frames` feature frames at 16 kHz.
    fn len_for_frames(frames: usize) -> usize {
        400 + (frames - 1) * 160
    }

    #[test]
    fn speed_match_hits_target_length_before_trim() {
        // Control 100 frames, target 200 frames: factor 0.5 doubles duration.
        let c = utterance("c1", "C01", "w0", len_for_frames(100), 400.0);
        let factor = pairwise_match_factor(100, 200).unwrap();
        let perturbed = speed_perturb(&c.clip, factor).unwrap();
        let got = expected_frames(perturbed.len(), 16000, &FbankConfig::default()).unwrap();
        assert!((got as i64 - 200).abs() <= 2, "got {got} frames");

        let t = utterance("t1", "D01", "w0", len_for_frames(200), 300.0);
        let out = build_pairs(&[c], &[t], &PairConfig::new(PerturbMode::Speed)).unwrap();
        assert_eq!(out.pairs.len(), 1);
        let pair = &out.pairs[0];
        assert_eq!(pair.control_fbank.n_frames, pair.target_fbank.n_frames);
        assert!(pair.control_fbank.n_frames >= 198);
    }

    #[test]
    fn identical_clip_yields_unit_factor_and_matching_matrices() {
        let c = utterance("c1", "C01", "w0", len_for_frames(80), 500.0);
        let mut t = c.clone();
        t.speaker_id = "D01".into();
        t.clip.speaker_id = "D01".into();
        let out = build_pairs(&[c], &[t], &PairConfig::new(PerturbMode::Speed)).unwrap();
        assert_eq!(out.pairs.len(), 1);
        let pair = &out.pairs[0];
        // Same audio on both sides: raw features agree tightly; normalized
        // ones may amplify float noise in floored-std (silent) bands.
        let raw_c = crate::features::denormalize(&pair.control_fbank, &out.control_stats["C01"])
            .unwrap();
        let mut raw_t = crate::features::denormalize(&pair.target_fbank, &out.target_stats).unwrap();
        raw_t.speaker_id = raw_c.speaker_id.clone();
        let max_raw = raw_c
            .data
            .iter()
            .zip(&raw_t.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_raw < 1e-9, "max_raw={max_raw}");
        let max_dev = pair
            .control_fbank
            .data
            .iter()
            .zip(&pair.target_fbank.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 1e-4, "max_dev={max_dev}");
    }

    #[test]
    fn cross_product_counts() {
        let controls: Vec<_> = (0..3)
            .map(|i| utterance(&format!("c{i}"), "C01", "w0", len_for_frames(60 + i), 420.0))
            .collect();
        let targets: Vec<_> = (0..2)
            .map(|i| utterance(&format!("t{i}"), "D01", "w0", len_for_frames(70 + i), 380.0))
            .collect();
        let out = build_pairs(&controls, &targets, &PairConfig::new(PerturbMode::Speed)).unwrap();
        assert_eq!(out.pairs.len(), 6);
    }

    #[test]
    fn unmatched_words_are_counted_and_skipped() {
        let c0 = utterance("c0", "C01", "w0", len_for_frames(50), 420.0);
        let c1 = utterance("c1", "C01", "w1", len_for_frames(50), 440.0);
        let t0 = utterance("t0", "D01", "w0", len_for_frames(55), 380.0);
        let out = build_pairs(&[c0, c1], &[t0], &PairConfig::new(PerturbMode::Speed)).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.unmatched_words, 1);
    }

    #[test]
    fn empty_result_rejected() {
        let c = utterance("c0", "C01", "w0", len_for_frames(50), 420.0);
        let t = utterance("t0", "D01", "w1", len_for_frames(50), 380.0);
        match build_pairs(&[c], &[t], &PairConfig::new(PerturbMode::Speed)) {
            Err(GanError::NoPairs {
                unmatched_words, ..
            }) => assert_eq!(unmatched_words, 2),
            other => panic!("expected NoPairs, got {other:?}"),
        }
    }

    #[test]
    fn mixed_target_speakers_rejected() {
        let c = utterance("c0", "C01", "w0", len_for_frames(50), 420.0);
        let t0 = utterance("t0", "D01", "w0", len_for_frames(55), 380.0);
        let t1 = utterance("t1", "D02", "w0", len_for_frames(55), 360.0);
        assert!(matches!(
            build_pairs(&[c], &[t0, t1], &PairConfig::new(PerturbMode::Speed)),
            Err(GanError::MixedTargetSpeakers { .. })
        ));
    }

    #[test]
    fn out_of_band_factors_are_skipped() {
        // 40 vs 200 frames needs factor 0.2, outside [0.5, 2.0].
        let c = utterance("c0", "C01", "w0", len_for_frames(40), 420.0);
        let t = utterance("t0", "D01", "w0", len_for_frames(200), 380.0);
        match build_pairs(&[c], &[t], &PairConfig::new(PerturbMode::Speed)) {
            Err(GanError::NoPairs { skipped_pairs, .. }) => assert_eq!(skipped_pairs, 1),
            other => panic!("expected NoPairs, got {other:?}"),
        }
    }

    #[test]
    fn per_word_cap_subsamples_deterministically() {
        let controls: Vec<_> = (0..8)
            .map(|i| utterance(&format!("c{i}"), "C01", "w0", len_for_frames(50 + i), 420.0))
            .collect();
        let targets: Vec<_> = (0..8)
            .map(|i| utterance(&format!("t{i}"), "D01", "w0", len_for_frames(55 + i), 380.0))
            .collect();
        let mut cfg = PairConfig::new(PerturbMode::Speed);
        cfg.max_pairs_per_word = 10;
        let a = build_pairs(&controls, &targets, &cfg).unwrap();
        let b = build_pairs(&controls, &targets, &cfg).unwrap();
        assert_eq!(a.pairs.len(), 10);
        let words_a: Vec<_> = a.pairs.iter().map(|p| p.control_fbank.utterance_id.clone()).collect();
        let words_b: Vec<_> = b.pairs.iter().map(|p| p.control_fbank.utterance_id.clone()).collect();
        assert_eq!(words_a, words_b);
    }

    #[test]
    fn tempo_mode_builds_pairs_too() {
        let c = utterance("c1", "C01", "w0", len_for_frames(80), 500.0);
        let t = utterance("t1", "D01", "w0", len_for_frames(100), 450.0);
        let out = build_pairs(&[c], &[t], &PairConfig::new(PerturbMode::Tempo)).unwrap();
        assert_eq!(out.pairs.len(), 1);
        // Duration matching within the WSOLA 2% contract plus trim.
        assert!(out.pairs[0].n_frames() >= 95);
    }
}
