//! Per-target-speaker spectrogram GAN: generator/discriminator pair,
//! duration-matched pair formation, adversarial training with a halving
//! learning-rate schedule, and the generation path.
//!
//! One GAN is trained per target speaker; checkpoints are keyed by that
//! speaker and never mix targets.

mod checkpoint;
mod generate;
mod model;
mod pairs;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, GanCheckpoint};
pub use generate::{generate, generate_raw};
pub use model::{DiscriminatorNet, GeneratorNet, FREQ_BINS};
pub use pairs::{build_pairs, CorpusUtterance, PairBuildOutput, PairConfig, PerturbMode};
pub use train::{lr_schedule, train_speaker_gan, MetricsRow, TrainConfig, TrainOutcome};

use thiserror::Error;

use crate::features::{FbankMatrix, FeatureError};
use crate::neural::NeuralError;
use crate::perturb::PerturbError;

#[derive(Debug, Error)]
pub enum GanError {
    #[error("no training pairs could be formed ({unmatched_words} unmatched words, {skipped_pairs} skipped pairs)")]
    NoPairs {
        unmatched_words: usize,
        skipped_pairs: usize,
    },
    #[error("training data mixes target speakers: {first:?} vs {other:?}")]
    MixedTargetSpeakers { first: String, other: String },
    #[error("feature dimension {0} unsupported; the GAN operates on 40 mel bins")]
    BadFeatureDim(usize),
    #[error("invalid GAN config: {0}")]
    BadConfig(String),
    #[error("non-finite {loss} loss at iteration {iteration}; last finite state attached")]
    NonFiniteLoss {
        loss: &'static str,
        iteration: u64,
        checkpoint: Box<GanCheckpoint>,
    },
    #[error("checkpoint {path}: {reason}")]
    BadCheckpoint { path: String, reason: String },
    #[error("checkpoint speaker {checkpoint:?} does not match requested {requested:?}")]
    SpeakerMismatch {
        checkpoint: String,
        requested: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Duration-matched, speaker-normalized training pair for one word.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub control_fbank: FbankMatrix,
    pub target_fbank: FbankMatrix,
    pub word_id: String,
}

impl TrainingPair {
    pub fn n_frames(&self) -> usize {
        self.control_fbank.n_frames
    }
}
