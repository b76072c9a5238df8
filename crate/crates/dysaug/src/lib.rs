//! Converts healthy "control" speech into disordered-like training data.
//!
//! The toolkit has three layers:
//!
//! * baseline waveform perturbation — WSOLA tempo stretching ([`perturb::tempo_perturb`])
//!   and resampling speed perturbation ([`perturb::speed_perturb`]), with per-speaker
//!   perturbation factors estimated from phone alignments ([`perturb::sd_factor`]);
//! * 40-dim log-mel filterbank extraction and speaker-level normalization
//!   ([`features`]);
//! * a per-target-speaker convolutional GAN that maps perturbed control
//!   spectrograms toward the target speaker's spectral characteristics
//!   ([`gan`]), built on a small reverse-mode kernel ([`neural`]).
//!
//! [`pipeline`] ties the layers together: corpus manifests, a synthetic
//! mini-corpus generator with ground-truth sidecars, and the end-to-end
//! augmentation flow.

pub mod dsp;
pub mod features;
pub mod gan;
pub mod neural;
pub mod perturb;
pub mod pipeline;

pub use dsp::{AudioClip, DspError, WindowFn, WindowKind};
pub use features::{FbankConfig, FbankMatrix, FeatureError, SpeakerNormStats};
pub use gan::{GanCheckpoint, GanError, TrainConfig, TrainingPair};
pub use neural::NeuralError;
pub use perturb::{AlignmentRecord, PerturbError, SpeakerDurationStats, WsolaConfig};
pub use pipeline::{AugmentationPlan, Manifest, PipelineError};

/// Umbrella error for callers that cross module boundaries (e.g. the CLI).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}
