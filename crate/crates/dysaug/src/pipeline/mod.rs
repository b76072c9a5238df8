//! Corpus manifests, synthetic mini-corpus generation, end-to-end
//! augmentation orchestration, and spectrogram dumps.

mod augment;
mod manifest;
mod spectrogram;
mod synth;

pub use augment::{
    load_augmented_manifest, run_augmentation, AugMode, AugmentOutput, AugmentationPlan,
    AugmentedEntry,
};
pub use manifest::{speaker_factor_table, FactorRow, Manifest, ManifestEntry, Role};
pub use spectrogram::{encode_csv, encode_pgm, spectrogram_dump, DumpFormat};
pub use synth::{
    ground_truth_path, load_ground_truth, synth_corpus, GroundTruth, SynthConfig, TargetTruth,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path} line {line}: {reason}")]
    ManifestParse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("duplicate utterance id {0:?} in manifest")]
    DuplicateUtterance(String),
    #[error("utterance {utterance_id:?}: audio path {path} not resolvable")]
    MissingAudio { utterance_id: String, path: String },
    #[error("invalid augmentation plan: {0}")]
    PlanInvalid(String),
    #[error("manifest has no control utterances")]
    NoControlUtterances,
    #[error("manifest has no utterances for target speaker {0:?}")]
    NoTargetUtterances(String),
    #[error("unknown dump format {0:?} (expected csv or pgm)")]
    UnknownFormat(String),
    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Wav(#[from] crate::dsp::wav::WavError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error(transparent)]
    Perturb(#[from] crate::perturb::PerturbError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Gan(#[from] crate::gan::GanError),
}
