//! Generation path: speaker-dependent perturbed control features are pushed
//! through the trained generator at full length (the all-convolutional
//! generator is shape-preserving, so inference never crops).

use crate::features::{
    accumulate_norm_stats, denormalize, normalize, FbankMatrix, SpeakerNormStats,
};
use crate::neural::Tensor4;

use super::model::FREQ_BINS;
use super::{GanCheckpoint, GanError};

/// Normalize with the source (control) statistics, run the generator, then
/// map into the target speaker's raw feature domain via its statistics.
pub fn generate_raw(
    checkpoint: &GanCheckpoint,
    perturbed_control: &FbankMatrix,
    source_stats: &SpeakerNormStats,
    target_stats: &SpeakerNormStats,
) -> Result<FbankMatrix, GanError> {
    if perturbed_control.n_bins != FREQ_BINS {
        return Err(GanError::BadFeatureDim(perturbed_control.n_bins));
    }
    if target_stats.speaker_id != checkpoint.target_speaker_id {
        return Err(GanError::SpeakerMismatch {
            checkpoint: checkpoint.target_speaker_id.clone(),
            requested: target_stats.speaker_id.clone(),
        });
    }

    let normalized = normalize(perturbed_control, source_stats)?;
    let mut x = Tensor4::zeros([1, 1, FREQ_BINS, normalized.n_frames]);
    for t in 0..normalized.n_frames {
        for (f, &v) in normalized.row(t).iter().enumerate() {
            let idx = x.index(0, 0, f, t);
            x.data[idx] = v;
        }
    }
    let y = checkpoint.generator.forward(&x)?;

    // The output now lives in the target speaker's normalized domain.
    let mut out = FbankMatrix {
        data: vec![0.0; normalized.n_frames * FREQ_BINS],
        n_frames: normalized.n_frames,
        n_bins: FREQ_BINS,
        frame_shift_sec: perturbed_control.frame_shift_sec,
        speaker_id: checkpoint.target_speaker_id.clone(),
        utterance_id: perturbed_control.utterance_id.clone(),
    };
    for t in 0..out.n_frames {
        for f in 0..FREQ_BINS {
            out.data[t * FREQ_BINS + f] = y.at(0, 0, f, t);
        }
    }
    denormalize(&out, target_stats).map_err(Into::into)
}

/// [`generate_raw`] followed by the final zero-mean/unit-variance pass over
/// freshly computed statistics of the generated output.
pub fn generate(
    checkpoint: &GanCheckpoint,
    perturbed_control: &FbankMatrix,
    source_stats: &SpeakerNormStats,
    target_stats: &SpeakerNormStats,
) -> Result<FbankMatrix, GanError> {
    let raw = generate_raw(checkpoint, perturbed_control, source_stats, target_stats)?;
    if raw.n_frames < 2 {
        return Ok(raw);
    }
    let fresh = accumulate_norm_stats(&[&raw])?;
    normalize(&raw, &fresh).map_err(Into::into)
}
