//! Deterministic synthetic mini-corpus: formant-like multi-tone "words" from
//! control speakers, plus disordered versions derived by a known transform
//! (per-speaker time stretch, fixed spectral tilt, band-limited noise).
//! The ground-truth parameters land in a sidecar file so tests can verify
//! recovery.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::wav::write_wav;
use crate::dsp::AudioClip;

use super::manifest::{Manifest, ManifestEntry, Role};
use super::PipelineError;

const LEAD_SILENCE_SEC: f64 = 0.06;
const EDGE_RAMP_SEC: f64 = 0.005;
const NOISE_TONES: usize = 160;
const NOISE_BAND_LO_HZ: f64 = 280.0;
const NOISE_BAND_HI_HZ: f64 = 7600.0;
/// Recording-floor noise on the control side keeps quiet mel bands at a
/// stable per-speaker level instead of fluctuating spectral leakage.
const CONTROL_NOISE_GAIN: f64 = 0.002;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_control_speakers: usize,
    pub n_target_speakers: usize,
    pub n_words: usize,
    pub utts_per_word: usize,
    pub sample_rate_hz: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 17,
            n_control_speakers: 2,
            n_target_speakers: 2,
            n_words: 10,
            utts_per_word: 3,
            sample_rate_hz: 16000,
        }
    }
}

/// Ground-truth transform parameters for one synthetic target speaker.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetTruth {
    pub speaker_id: String,
    /// Phone durations are multiplied by this; slower speech has stretch > 1.
    pub stretch: f64,
    pub tilt_db_per_khz: f64,
    pub noise_gain: f64,
    /// Alignment-recovered factor should land here: 1 / stretch.
    pub expected_sd_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sample_rate_hz: u32,
    pub control_speakers: Vec<String>,
    pub control_noise_gain: f64,
    pub target_speakers: Vec<TargetTruth>,
}

struct PhoneSpec {
    freqs: [f64; 3],
    amps: [f64; 3],
    base_dur_sec: f64,
}

struct WordSpec {
    phones: Vec<PhoneSpec>,
}

fn draw_words(rng: &mut ChaCha8Rng, n_words: usize) -> Vec<WordSpec> {
    (0..n_words)
        .map(|_| {
            let n_phones = rng.gen_range(2..=4);
            let phones = (0..n_phones)
                .map(|_| PhoneSpec {
                    freqs: [
                        rng.gen_range(250.0..700.0),
                        rng.gen_range(900.0..2200.0),
                        rng.gen_range(2400.0..3600.0),
                    ],
                    amps: [
                        0.30 * rng.gen_range(0.8..1.2),
                        0.22 * rng.gen_range(0.8..1.2),
                        0.10 * rng.gen_range(0.8..1.2),
                    ],
                    base_dur_sec: rng.gen_range(0.09..0.16),
                })
                .collect();
            WordSpec { phones }
        })
        .collect()
}

struct RenderedUtterance {
    clip: AudioClip,
    /// (phone_label, start_sec, end_sec) including leading/trailing silence.
    alignment: Vec<(String, f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn render_utterance(
    word_idx: usize,
    word: &WordSpec,
    stretch: f64,
    tilt_db_per_khz: f64,
    noise_gain: f64,
    rate: u32,
    rng: &mut ChaCha8Rng,
) -> RenderedUtterance {
    let rate_f = rate as f64;
    let sil = (LEAD_SILENCE_SEC * rate_f).round() as usize;
    let ramp = (EDGE_RAMP_SEC * rate_f).round() as usize;
    let dur_jitter = 1.0 + rng.gen_range(-0.01..0.01);
    let amp_jitter = rng.gen_range(0.95..1.05);

    // Band-limited noise: tones on a fixed frequency grid with per-utterance
    // random phases, so each mel band sees a stable floor level.
    let noise_tones: Vec<(f64, f64)> = (0..NOISE_TONES)
        .map(|i| {
            let f = NOISE_BAND_LO_HZ
                + (i as f64 + 0.5) * (NOISE_BAND_HI_HZ - NOISE_BAND_LO_HZ) / NOISE_TONES as f64;
            (f, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let noise_scale = noise_gain / (NOISE_TONES as f64).sqrt();

    let mut samples = vec![0.0f64; sil];
    let mut alignment = vec![("sil".to_string(), 0.0, sil as f64 / rate_f)];
    for (p, phone) in word.phones.iter().enumerate() {
        let n = (phone.base_dur_sec * stretch * dur_jitter * rate_f).round() as usize;
        let start = samples.len();
        let phases: [f64; 3] = [
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..2.0 * PI),
        ];
        for t in 0..n {
            let mut v = 0.0;
            for k in 0..3 {
                let f = phone.freqs[k];
                let tilt_gain = 10f64.powf(tilt_db_per_khz * (f / 1000.0) / 20.0);
                v += phone.amps[k] * amp_jitter * tilt_gain
                    * (2.0 * PI * f * t as f64 / rate_f + phases[k]).sin();
            }
            // Edge taper keeps phone joins click-free.
            let env = if t < ramp {
                0.5 * (1.0 - (PI * t as f64 / ramp as f64).cos())
            } else if t + ramp > n {
                0.5 * (1.0 - (PI * (n - t) as f64 / ramp as f64).cos())
            } else {
                1.0
            };
            samples.push(v * env);
        }
        let end = samples.len();
        alignment.push((
            format!("w{word_idx:02}p{p}"),
            start as f64 / rate_f,
            end as f64 / rate_f,
        ));
    }
    let voiced_end = samples.len();
    samples.extend(std::iter::repeat(0.0).take(sil));
    alignment.push((
        "sil".to_string(),
        voiced_end as f64 / rate_f,
        samples.len() as f64 / rate_f,
    ));
    // The floor covers the whole recording, silence included.
    if noise_gain > 0.0 {
        for (t, s) in samples.iter_mut().enumerate() {
            let mut nz = 0.0;
            for &(f, ph) in &noise_tones {
                nz += (2.0 * PI * f * t as f64 / rate_f + ph).sin();
            }
            *s += noise_scale * nz;
        }
    }

    RenderedUtterance {
        clip: AudioClip::new(samples, rate),
        alignment,
    }
}

const TARGET_STRETCHES: [f64; 4] = [1.25, 1.4, 1.15, 1.6];
const TARGET_TILTS: [f64; 4] = [-4.0, -5.0, -3.5, -6.0];
const TARGET_NOISE: [f64; 4] = [0.055, 0.070, 0.060, 0.080];

/// Generates the corpus under `out_dir`: `wav/`, `align/`, `manifest.jsonl`
/// and `ground_truth.json`. Same seed, same bytes.
pub fn synth_corpus(cfg: &SynthConfig, out_dir: &Path) -> Result<Manifest, PipelineError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source: std::io::Error| PipelineError::Io {
            path: path.clone(),
            source,
        }
    };
    let wav_dir = out_dir.join("wav");
    let align_dir = out_dir.join("align");
    std::fs::create_dir_all(&wav_dir).map_err(io_err(&wav_dir))?;
    std::fs::create_dir_all(&align_dir).map_err(io_err(&align_dir))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let words = draw_words(&mut rng, cfg.n_words);

    let control_ids: Vec<String> = (1..=cfg.n_control_speakers)
        .map(|i| format!("C{i:02}"))
        .collect();
    let targets: Vec<TargetTruth> = (0..cfg.n_target_speakers)
        .map(|j| {
            let stretch = TARGET_STRETCHES[j % TARGET_STRETCHES.len()];
            TargetTruth {
                speaker_id: format!("D{:02}", j + 1),
                stretch,
                tilt_db_per_khz: TARGET_TILTS[j % TARGET_TILTS.len()],
                noise_gain: TARGET_NOISE[j % TARGET_NOISE.len()],
                expected_sd_factor: 1.0 / stretch,
            }
        })
        .collect();

    struct SpeakerPlan {
        speaker_id: String,
        role: Role,
        stretch: f64,
        tilt: f64,
        noise: f64,
    }
    let mut speakers = Vec::new();
    for id in &control_ids {
        speakers.push(SpeakerPlan {
            speaker_id: id.clone(),
            role: Role::Control,
            stretch: 1.0,
            tilt: 0.0,
            noise: CONTROL_NOISE_GAIN,
        });
    }
    for t in &targets {
        speakers.push(SpeakerPlan {
            speaker_id: t.speaker_id.clone(),
            role: Role::Disordered,
            stretch: t.stretch,
            tilt: t.tilt_db_per_khz,
            noise: t.noise_gain,
        });
    }

    let mut entries = Vec::new();
    for sp in &speakers {
        // Per-speaker stream keeps rendering independent of speaker count.
        let mut sp_rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ hash_str(&sp.speaker_id),
        );
        let mut align_text = String::new();
        for (w, word) in words.iter().enumerate() {
            for u in 0..cfg.utts_per_word {
                let utt_id = format!("{}_w{w:02}_u{u}", sp.speaker_id);
                let rendered = render_utterance(
                    w,
                    word,
                    sp.stretch,
                    sp.tilt,
                    sp.noise,
                    cfg.sample_rate_hz,
                    &mut sp_rng,
                );
                let wav_path = wav_dir.join(format!("{utt_id}.wav"));
                write_wav(&wav_path, &rendered.clip)?;
                for (phone, start, end) in &rendered.alignment {
                    align_text.push_str(&format!("{utt_id}\t{phone}\t{start:.6}\t{end:.6}\n"));
                }
                entries.push(ManifestEntry {
                    utterance_id: utt_id.clone(),
                    speaker_id: sp.speaker_id.clone(),
                    word_id: format!("w{w:02}"),
                    role: sp.role,
                    audio_path: format!("wav/{utt_id}.wav"),
                    alignment_ref: Some(format!("align/{}.tsv", sp.speaker_id)),
                });
            }
        }
        let align_path = align_dir.join(format!("{}.tsv", sp.speaker_id));
        std::fs::write(&align_path, align_text).map_err(io_err(&align_path))?;
    }

    let truth = GroundTruth {
        sample_rate_hz: cfg.sample_rate_hz,
        control_speakers: control_ids,
        control_noise_gain: CONTROL_NOISE_GAIN,
        target_speakers: targets,
    };
    let truth_path = out_dir.join("ground_truth.json");
    let truth_json =
        serde_json::to_string_pretty(&truth).expect("ground truth serializes");
    std::fs::write(&truth_path, truth_json).map_err(io_err(&truth_path))?;

    let manifest_path = out_dir.join("manifest.jsonl");
    Manifest::save(&manifest_path, &entries)?;
    Manifest::load(&manifest_path)
}

pub fn ground_truth_path(out_dir: &Path) -> PathBuf {
    out_dir.join("ground_truth.json")
}

pub fn load_ground_truth(out_dir: &Path) -> Result<GroundTruth, PipelineError> {
    let path = ground_truth_path(out_dir);
    let text = std::fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn hash_str(s: &str) -> u64 {
    // FNV-1a; stable across platforms and runs.
    let mut h = 0xcbf29ce484222325u64;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{default_silence_labels, sd_factor, speaker_duration_stats};
    use crate::pipeline::manifest::speaker_factor_table;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            seed: 17,
            n_control_speakers: 2,
            n_target_speakers: 2,
            n_words: 10,
            utts_per_word: 3,
            sample_rate_hz: 16000,
        }
    }

    fn dir_digest(root: &Path) -> Vec<(String, u64)> {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let bytes = std::fs::read(&p).unwrap();
                    let mut h = 0xcbf29ce484222325u64;
                    for b in &bytes {
                        h ^= *b as u64;
                        h = h.wrapping_mul(0x100000001b3);
                    }
                    files.push((
                        p.strip_prefix(root).unwrap().display().to_string(),
                        h,
                    ));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn same_seed_same_bytes() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_words: 3,
            utts_per_word: 2,
            ..small_cfg()
        };
        synth_corpus(&cfg, d1.path()).unwrap();
        synth_corpus(&cfg, d2.path()).unwrap();
        assert_eq!(dir_digest(d1.path()), dir_digest(d2.path()));
    }

    #[test]
    fn manifest_counts_words_times_utts_times_speakers() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_corpus(&small_cfg(), dir.path()).unwrap();
        assert_eq!(m.entries.len(), 10 * 3 * 4);
    }

    #[test]
    fn alignments_recover_the_ground_truth_stretch() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_corpus(&small_cfg(), dir.path()).unwrap();
        let truth = load_ground_truth(dir.path()).unwrap();
        let alignments = m.load_alignments().unwrap();
        let silence = default_silence_labels();

        let control: Vec<_> = truth
            .control_speakers
            .iter()
            .map(|s| speaker_duration_stats(s, &alignments[s], &silence).unwrap())
            .collect();
        for t in &truth.target_speakers {
            let stats =
                speaker_duration_stats(&t.speaker_id, &alignments[&t.speaker_id], &silence)
                    .unwrap();
            let f = sd_factor(&control, &stats).unwrap();
            assert!(
                (f - t.expected_sd_factor).abs() <= 0.01,
                "{}: recovered {f}, expected {}",
                t.speaker_id,
                t.expected_sd_factor
            );
        }

        // The factor table agrees with the direct computation.
        let rows = speaker_factor_table(&m, &silence).unwrap();
        for t in &truth.target_speakers {
            let row = rows.iter().find(|r| r.speaker_id == t.speaker_id).unwrap();
            assert!((row.sd_factor.unwrap() - t.expected_sd_factor).abs() <= 0.01);
        }
    }

    #[test]
    fn rendered_audio_is_clip_safe_and_nonempty() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_words: 2,
            utts_per_word: 1,
            ..small_cfg()
        };
        let m = synth_corpus(&cfg, dir.path()).unwrap();
        for entry in &m.entries {
            let clip = m.load_clip(entry).unwrap();
            assert!(clip.len() > 1600, "{} too short", entry.utterance_id);
            let peak = clip.samples.iter().fold(0.0f64, |a, &s| a.max(s.abs()));
            assert!(peak <= 1.0, "{} clips at {peak}", entry.utterance_id);
            assert!(peak > 0.05, "{} is near-silent", entry.utterance_id);
        }
    }
}
