//! 40-dimensional log-mel filterbank extraction and speaker-level
//! zero-mean/unit-variance normalization.
//!
//! Frame geometry is the conventional 25 ms / 10 ms with 0.97 pre-emphasis
//! and a Hann window; the mel scale is `2595 * log10(1 + f/700)` with
//! triangular filters spanning 0 Hz to Nyquist.

mod io;

pub use io::{read_feature_file, write_feature_file, write_feature_text};

use thiserror::Error;

use crate::dsp::{fft_real, AudioClip, WindowFn};

pub const ENERGY_FLOOR: f64 = 1e-10;
pub const STD_FLOOR: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("clip {utterance:?} has {samples} samples, shorter than one {frame_len}-sample frame")]
    ClipTooShort {
        utterance: String,
        samples: usize,
        frame_len: usize,
    },
    #[error("invalid filterbank config: {0}")]
    BadConfig(String),
    #[error("normalization stats need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("matrices from mixed speakers: {first:?} vs {other:?}")]
    MixedSpeakers { first: String, other: String },
    #[error("speaker mismatch: matrix belongs to {matrix:?}, stats to {stats:?}")]
    SpeakerMismatch { matrix: String, stats: String },
    #[error("dimension mismatch: matrix has {matrix} bins, stats have {stats}")]
    DimMismatch { matrix: usize, stats: usize },
    #[error("feature file {path}: {reason}")]
    BadFeatureFile { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
}

/// T x F matrix of log-mel energies, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FbankMatrix {
    pub data: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub frame_shift_sec: f64,
    pub speaker_id: String,
    pub utterance_id: String,
}

impl FbankMatrix {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    /// Drops trailing frames, keeping the first `n_frames`.
    pub fn truncate_frames(&mut self, n_frames: usize) {
        if n_frames < self.n_frames {
            self.data.truncate(n_frames * self.n_bins);
            self.n_frames = n_frames;
        }
    }
}

/// Per-speaker normalization statistics pooled over utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerNormStats {
    pub speaker_id: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub frame_count: usize,
}

#[derive(Debug, Clone)]
pub struct FbankConfig {
    pub n_mels: usize,
    pub frame_len_sec: f64,
    pub frame_shift_sec: f64,
    pub pre_emphasis: f64,
}

impl Default for FbankConfig {
    fn default() -> Self {
        Self {
            n_mels: 40,
            frame_len_sec: 0.025,
            frame_shift_sec: 0.010,
            pre_emphasis: 0.97,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Number of frames for a clip of `samples` at the given geometry:
/// `1 + floor((len - frame_len) / frame_shift)`, requiring one full frame.
pub fn frame_count(samples: usize, frame_len: usize, frame_shift: usize) -> Option<usize> {
    if samples < frame_len {
        None
    } else {
        Some(1 + (samples - frame_len) / frame_shift)
    }
}

/// Frame count a clip will produce under `cfg` at its sample rate.
pub fn expected_frames(clip_samples: usize, sample_rate_hz: u32, cfg: &FbankConfig) -> Option<usize> {
    let frame_len = (cfg.frame_len_sec * sample_rate_hz as f64).round() as usize;
    let frame_shift = (cfg.frame_shift_sec * sample_rate_hz as f64).round() as usize;
    frame_count(clip_samples, frame_len, frame_shift)
}

/// Triangular mel filterbank over the `n_fft/2 + 1` bins, peak weight 1.
///
/// Returned as `n_mels` rows of sparse (bin, weight) pairs.
fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate_hz: u32) -> Vec<Vec<(usize, f64)>> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let centers: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    let n_bins = n_fft / 2 + 1;
    let bin_hz = sample_rate_hz as f64 / n_fft as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (centers[m], centers[m + 1], centers[m + 2]);
            let mut weights = Vec::new();
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f >= lo && f <= mid && mid > lo {
                    (f - lo) / (mid - lo)
                } else if f > mid && f <= hi && hi > mid {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                if w > 0.0 {
                    weights.push((k, w));
                }
            }
            weights
        })
        .collect()
}

/// Log-mel filterbank features for one clip.
pub fn extract_fbank(clip: &AudioClip, cfg: &FbankConfig) -> Result<FbankMatrix, FeatureError> {
    clip.validate()?;
    if cfg.n_mels == 0 {
        return Err(FeatureError::BadConfig("n_mels must be positive".into()));
    }
    let rate = clip.sample_rate_hz;
    let frame_len = (cfg.frame_len_sec * rate as f64).round() as usize;
    let frame_shift = (cfg.frame_shift_sec * rate as f64).round() as usize;
    if frame_len == 0 || frame_shift == 0 {
        return Err(FeatureError::BadConfig(
            "frame length and shift must be at least one sample".into(),
        ));
    }
    let n = clip.samples.len();
    let n_frames = frame_count(n, frame_len, frame_shift).ok_or(FeatureError::ClipTooShort {
        utterance: clip.utterance_id.clone(),
        samples: n,
        frame_len,
    })?;

    let n_fft = frame_len.next_power_of_two();
    let window = WindowFn::hann(frame_len).values();
    let filters = mel_filterbank(cfg.n_mels, n_fft, rate);

    let mut data = Vec::with_capacity(n_frames * cfg.n_mels);
    let mut frame = vec![0.0f64; n_fft];
    for t in 0..n_frames {
        let start = t * frame_shift;
        let src = &clip.samples[start..start + frame_len];
        // Pre-emphasis inside the frame, first sample scaled by (1 - k).
        frame[0] = src[0] * (1.0 - cfg.pre_emphasis);
        for i in 1..frame_len {
            frame[i] = src[i] - cfg.pre_emphasis * src[i - 1];
        }
        for i in 0..frame_len {
            frame[i] *= window[i];
        }
        for v in frame[frame_len..].iter_mut() {
            *v = 0.0;
        }
        let spectrum = fft_real(&frame)?;
        let power: Vec<f64> = spectrum.iter().map(|c| c.norm_sqr()).collect();
        for weights in &filters {
            let energy: f64 = weights.iter().map(|&(k, w)| w * power[k]).sum();
            data.push(energy.max(ENERGY_FLOOR).ln());
        }
    }

    Ok(FbankMatrix {
        data,
        n_frames,
        n_bins: cfg.n_mels,
        frame_shift_sec: cfg.frame_shift_sec,
        speaker_id: clip.speaker_id.clone(),
        utterance_id: clip.utterance_id.clone(),
    })
}

/// Streaming accumulator for speaker-level statistics; partial accumulators
/// merge exactly, so utterance-level work can fan out and fold back.
#[derive(Debug, Clone)]
pub struct NormAccumulator {
    speaker_id: String,
    n_bins: usize,
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl NormAccumulator {
    pub fn new(speaker_id: &str, n_bins: usize) -> Self {
        Self {
            speaker_id: speaker_id.to_string(),
            n_bins,
            count: 0,
            sum: vec![0.0; n_bins],
            sum_sq: vec![0.0; n_bins],
        }
    }

    pub fn add(&mut self, mat: &FbankMatrix) -> Result<(), FeatureError> {
        if mat.speaker_id != self.speaker_id {
            return Err(FeatureError::MixedSpeakers {
                first: self.speaker_id.clone(),
                other: mat.speaker_id.clone(),
            });
        }
        if mat.n_bins != self.n_bins {
            return Err(FeatureError::DimMismatch {
                matrix: mat.n_bins,
                stats: self.n_bins,
            });
        }
        for t in 0..mat.n_frames {
            for (d, &v) in mat.row(t).iter().enumerate() {
                self.sum[d] += v;
                self.sum_sq[d] += v * v;
            }
        }
        self.count += mat.n_frames;
        Ok(())
    }

    pub fn merge(&mut self, other: &NormAccumulator) -> Result<(), FeatureError> {
        if other.speaker_id != self.speaker_id {
            return Err(FeatureError::MixedSpeakers {
                first: self.speaker_id.clone(),
                other: other.speaker_id.clone(),
            });
        }
        if other.n_bins != self.n_bins {
            return Err(FeatureError::DimMismatch {
                matrix: other.n_bins,
                stats: self.n_bins,
            });
        }
        for d in 0..self.n_bins {
            self.sum[d] += other.sum[d];
            self.sum_sq[d] += other.sum_sq[d];
        }
        self.count += other.count;
        Ok(())
    }

    /// Population mean and standard deviation, std floored at 1e-5.
    pub fn finalize(&self) -> Result<SpeakerNormStats, FeatureError> {
        if self.count < 2 {
            return Err(FeatureError::TooFewFrames(self.count));
        }
        let n = self.count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let std: Vec<f64> = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| ((sq / n - m * m).max(0.0)).sqrt().max(STD_FLOOR))
            .collect();
        Ok(SpeakerNormStats {
            speaker_id: self.speaker_id.clone(),
            mean,
            std,
            frame_count: self.count,
        })
    }
}

/// Pooled mean/std over all frames of one speaker's matrices.
pub fn accumulate_norm_stats(mats: &[&FbankMatrix]) -> Result<SpeakerNormStats, FeatureError> {
    let first = mats.first().ok_or(FeatureError::TooFewFrames(0))?;
    let mut acc = NormAccumulator::new(&first.speaker_id, first.n_bins);
    for mat in mats {
        acc.add(mat)?;
    }
    acc.finalize()
}

fn check_speaker_and_dims(
    mat: &FbankMatrix,
    stats: &SpeakerNormStats,
) -> Result<(), FeatureError> {
    if mat.speaker_id != stats.speaker_id {
        return Err(FeatureError::SpeakerMismatch {
            matrix: mat.speaker_id.clone(),
            stats: stats.speaker_id.clone(),
        });
    }
    if mat.n_bins != stats.mean.len() {
        return Err(FeatureError::DimMismatch {
            matrix: mat.n_bins,
            stats: stats.mean.len(),
        });
    }
    Ok(())
}

/// `(x - mean) / std` per dimension.
pub fn normalize(mat: &FbankMatrix, stats: &SpeakerNormStats) -> Result<FbankMatrix, FeatureError> {
    check_speaker_and_dims(mat, stats)?;
    let mut out = mat.clone();
    for t in 0..out.n_frames {
        let row = out.row_mut(t);
        for d in 0..row.len() {
            row[d] = (row[d] - stats.mean[d]) / stats.std[d];
        }
    }
    Ok(out)
}

/// Exact inverse of [`normalize`].
pub fn denormalize(
    mat: &FbankMatrix,
    stats: &SpeakerNormStats,
) -> Result<FbankMatrix, FeatureError> {
    check_speaker_and_dims(mat, stats)?;
    let mut out = mat.clone();
    for t in 0..out.n_frames {
        let row = out.row_mut(t);
        for d in 0..row.len() {
            row[d] = row[d] * stats.std[d] + stats.mean[d];
        }
    }
    Ok(out)
}
