//! End-to-end augmentation: perturb every control utterance by the plan's
//! speaker-dependent factor (composed with global variant factors for
//! multiplicity above one), extract features, optionally push them through
//! the target speaker's generator, and write feature files plus a
//! provenance-tagged output manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features::{
    accumulate_norm_stats, extract_fbank, write_feature_file, FbankConfig, FbankMatrix,
};
use crate::gan::{generate, read_checkpoint, GanCheckpoint, PerturbMode};
use crate::perturb::{speed_perturb, tempo_perturb, WsolaConfig, MAX_FACTOR, MIN_FACTOR};

use super::manifest::{Manifest, ManifestEntry, Role};
use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugMode {
    #[serde(rename = "tempo")]
    Tempo,
    #[serde(rename = "tempo-gan")]
    TempoGan,
    #[serde(rename = "speed")]
    Speed,
    #[serde(rename = "speed-gan")]
    SpeedGan,
}

impl AugMode {
    pub fn base(&self) -> PerturbMode {
        match self {
            AugMode::Tempo | AugMode::TempoGan => PerturbMode::Tempo,
            AugMode::Speed | AugMode::SpeedGan => PerturbMode::Speed,
        }
    }

    pub fn is_gan(&self) -> bool {
        matches!(self, AugMode::TempoGan | AugMode::SpeedGan)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AugMode::Tempo => "tempo",
            AugMode::TempoGan => "tempo-gan",
            AugMode::Speed => "speed",
            AugMode::SpeedGan => "speed-gan",
        }
    }
}

impl std::str::FromStr for AugMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tempo" => Ok(AugMode::Tempo),
            "tempo-gan" => Ok(AugMode::TempoGan),
            "speed" => Ok(AugMode::Speed),
            "speed-gan" => Ok(AugMode::SpeedGan),
            other => Err(format!(
                "unknown mode {other:?} (expected tempo, tempo-gan, speed or speed-gan)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub target_speaker_id: String,
    pub mode: AugMode,
    /// Speaker-dependent factor from duration analysis.
    pub sd_factor: f64,
    /// 1x emits one copy per utterance; 2x the global pair {0.9, 1.1};
    /// 3x the full global set {0.9, 1.0, 1.1}.
    pub multiplicity: usize,
    pub output_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_path: Option<String>,
}

impl AugmentationPlan {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    /// Global variant factors implied by the multiplicity.
    pub fn variant_factors(&self) -> Result<Vec<f64>, PipelineError> {
        let globals: &[f64] = match self.multiplicity {
            1 => &[1.0],
            2 => &[0.9, 1.1],
            3 => &[0.9, 1.0, 1.1],
            other => {
                return Err(PipelineError::PlanInvalid(format!(
                    "multiplicity {other} unsupported (expected 1, 2 or 3)"
                )))
            }
        };
        let factors: Vec<f64> = globals.iter().map(|g| self.sd_factor * g).collect();
        for &f in &factors {
            if !(MIN_FACTOR..=MAX_FACTOR).contains(&f) || !f.is_finite() {
                return Err(PipelineError::PlanInvalid(format!(
                    "composed factor {f:.4} (sd {:.4}) outside [{MIN_FACTOR}, {MAX_FACTOR}]",
                    self.sd_factor
                )));
            }
        }
        Ok(factors)
    }
}

/// One output feature file with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedEntry {
    pub utterance_id: String,
    pub source_utterance_id: String,
    pub source_speaker_id: String,
    pub target_speaker_id: String,
    pub word_id: String,
    pub feature_path: String,
    pub mode: AugMode,
    pub factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_id: Option<String>,
}

pub struct AugmentOutput {
    pub entries: Vec<AugmentedEntry>,
    pub manifest_path: PathBuf,
}

pub fn load_augmented_manifest(path: &Path) -> Result<Vec<AugmentedEntry>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        entries.push(
            serde_json::from_str(line).map_err(|e| PipelineError::ManifestParse {
                path: path.display().to_string(),
                line: idx + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(entries)
}

/// Runs the plan over every control utterance of the manifest.
///
/// Deterministic and idempotent: re-running with the same inputs overwrites
/// the outputs with identical bytes.
pub fn run_augmentation(
    manifest: &Manifest,
    plan: &AugmentationPlan,
) -> Result<AugmentOutput, PipelineError> {
    let factors = plan.variant_factors()?;

    // Everything that can fail by configuration fails before any work.
    let checkpoint: Option<GanCheckpoint> = if plan.mode.is_gan() {
        let path = plan.checkpoint_path.as_ref().ok_or_else(|| {
            PipelineError::PlanInvalid(format!(
                "mode {} requires checkpoint_path",
                plan.mode.as_str()
            ))
        })?;
        let ckpt = read_checkpoint(Path::new(path))?;
        if ckpt.target_speaker_id != plan.target_speaker_id {
            return Err(PipelineError::PlanInvalid(format!(
                "checkpoint is for speaker {:?}, plan targets {:?}",
                ckpt.target_speaker_id, plan.target_speaker_id
            )));
        }
        Some(ckpt)
    } else {
        None
    };

    let mut control_entries: Vec<&ManifestEntry> =
        manifest.entries_for_role(Role::Control).collect();
    control_entries.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    if control_entries.is_empty() {
        return Err(PipelineError::NoControlUtterances);
    }
    if plan.mode.is_gan()
        && !manifest
            .entries
            .iter()
            .any(|e| e.role == Role::Disordered && e.speaker_id == plan.target_speaker_id)
    {
        return Err(PipelineError::NoTargetUtterances(
            plan.target_speaker_id.clone(),
        ));
    }

    let out_dir = Path::new(&plan.output_dir);
    let feat_dir = out_dir.join("feats");
    std::fs::create_dir_all(&feat_dir).map_err(|source| PipelineError::Io {
        path: feat_dir.display().to_string(),
        source,
    })?;

    let fbank_cfg = FbankConfig::default();

    // Pass 1: perturb and extract features for every (utterance, variant).
    struct WorkItem {
        entry_idx: usize,
        variant: usize,
        factor: f64,
        matrix: FbankMatrix,
    }
    let mut items = Vec::new();
    for (entry_idx, entry) in control_entries.iter().enumerate() {
        let clip = manifest.load_clip(entry)?;
        for (variant, &factor) in factors.iter().enumerate() {
            let perturbed = match plan.mode.base() {
                PerturbMode::Speed => speed_perturb(&clip, factor)?,
                PerturbMode::Tempo => tempo_perturb(
                    &clip,
                    factor,
                    &WsolaConfig::for_sample_rate(clip.sample_rate_hz),
                )?,
            };
            let matrix = extract_fbank(&perturbed, &fbank_cfg)?;
            items.push(WorkItem {
                entry_idx,
                variant,
                factor,
                matrix,
            });
        }
    }

    // Pass 2 (GAN modes): speaker-level statistics, then generation.
    let checkpoint_id = checkpoint
        .as_ref()
        .map(|c| format!("{}@{}", c.target_speaker_id, c.iteration));
    if let Some(ckpt) = &checkpoint {
        let mut by_speaker: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, item) in items.iter().enumerate() {
            by_speaker
                .entry(item.matrix.speaker_id.clone())
                .or_default()
                .push(i);
        }
        let mut source_stats = BTreeMap::new();
        for (speaker, idxs) in &by_speaker {
            let mats: Vec<&FbankMatrix> = idxs.iter().map(|&i| &items[i].matrix).collect();
            source_stats.insert(speaker.clone(), accumulate_norm_stats(&mats)?);
        }

        let mut target_entries: Vec<&ManifestEntry> = manifest
            .entries
            .iter()
            .filter(|e| e.role == Role::Disordered && e.speaker_id == plan.target_speaker_id)
            .collect();
        target_entries.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        let target_mats: Vec<FbankMatrix> = target_entries
            .iter()
            .map(|e| {
                let clip = manifest.load_clip(e)?;
                Ok(extract_fbank(&clip, &fbank_cfg)?)
            })
            .collect::<Result<_, PipelineError>>()?;
        let target_refs: Vec<&FbankMatrix> = target_mats.iter().collect();
        let target_stats = accumulate_norm_stats(&target_refs)?;

        for item in items.iter_mut() {
            let src = &source_stats[&item.matrix.speaker_id];
            item.matrix = generate(ckpt, &item.matrix, src, &target_stats)?;
        }
    }

    // Pass 3: write features and the provenance manifest.
    let mut entries = Vec::with_capacity(items.len());
    for item in &mut items {
        let src = control_entries[item.entry_idx];
        let out_id = format!(
            "{}__{}_{}_v{}",
            src.utterance_id,
            plan.target_speaker_id,
            plan.mode.as_str(),
            item.variant
        );
        let rel_path = format!("feats/{out_id}.fbk");
        item.matrix.utterance_id = out_id.clone();
        write_feature_file(&out_dir.join(&rel_path), &item.matrix)?;
        entries.push(AugmentedEntry {
            utterance_id: out_id,
            source_utterance_id: src.utterance_id.clone(),
            source_speaker_id: src.speaker_id.clone(),
            target_speaker_id: plan.target_speaker_id.clone(),
            word_id: src.word_id.clone(),
            feature_path: rel_path,
            mode: plan.mode,
            factor: item.factor,
            checkpoint_id: checkpoint_id.clone(),
        });
    }
    entries.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));

    let manifest_path = out_dir.join("augmented.jsonl");
    let mut text = String::new();
    for e in &entries {
        text.push_str(&serde_json::to_string(e).expect("augmented entries serialize"));
        text.push('\n');
    }
    std::fs::write(&manifest_path, text).map_err(|source| PipelineError::Io {
        path: manifest_path.display().to_string(),
        source,
    })?;

    Ok(AugmentOutput {
        entries,
        manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::read_feature_file;
    use crate::pipeline::synth::{synth_corpus, SynthConfig};

    fn tiny_corpus(dir: &Path) -> Manifest {
        synth_corpus(
            &SynthConfig {
                seed: 17,
                n_control_speakers: 1,
                n_target_speakers: 1,
                n_words: 3,
                utts_per_word: 2,
                sample_rate_hz: 16000,
            },
            dir,
        )
        .unwrap()
    }

    #[test]
    fn unit_speed_factor_reproduces_plain_fbank() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path());
        let out = dir.path().join("aug");
        let plan = AugmentationPlan {
            target_speaker_id: "D01".into(),
            mode: AugMode::Speed,
            sd_factor: 1.0,
            multiplicity: 1,
            output_dir: out.display().to_string(),
            checkpoint_path: None,
        };
        let result = run_augmentation(&manifest, &plan).unwrap();
        assert_eq!(result.entries.len(), 6);

        for entry in &result.entries {
            let file_mat = read_feature_file(&out.join(&entry.feature_path)).unwrap();
            let src = manifest
                .entries
                .iter()
                .find(|e| e.utterance_id == entry.source_utterance_id)
                .unwrap();
            let clip = manifest.load_clip(src).unwrap();
            let plain = extract_fbank(&clip, &FbankConfig::default()).unwrap();
            assert_eq!(file_mat.n_frames, plain.n_frames);
            // f64 pipeline equality within 1e-6; file values are f32-rounded.
            let max_dev = file_mat
                .data
                .iter()
                .zip(&plain.data)
                .map(|(a, b)| (a - (*b as f32 as f64)).abs())
                .fold(0.0, f64::max);
            assert!(max_dev < 1e-6, "{}: max_dev={max_dev}", entry.utterance_id);
        }
    }

    #[test]
    fn feature_files_are_counted_and_shaped() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path());
        let out = dir.path().join("aug");
        let plan = AugmentationPlan {
            target_speaker_id: "D01".into(),
            mode: AugMode::Tempo,
            sd_factor: 0.8,
            multiplicity: 1,
            output_dir: out.display().to_string(),
            checkpoint_path: None,
        };
        let result = run_augmentation(&manifest, &plan).unwrap();
        assert_eq!(result.entries.len(), 6);
        for entry in &result.entries {
            let mat = read_feature_file(&out.join(&entry.feature_path)).unwrap();
            assert_eq!(mat.n_bins, 40);
            assert!(mat.n_frames > 0);
        }
    }

    #[test]
    fn multiplicity_doubles_output_count() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path());
        let mk_plan = |mult: usize, out: &str| AugmentationPlan {
            target_speaker_id: "D01".into(),
            mode: AugMode::Speed,
            sd_factor: 0.9,
            multiplicity: mult,
            output_dir: dir.path().join(out).display().to_string(),
            checkpoint_path: None,
        };
        let one = run_augmentation(&manifest, &mk_plan(1, "aug1")).unwrap();
        let two = run_augmentation(&manifest, &mk_plan(2, "aug2")).unwrap();
        assert_eq!(two.entries.len(), 2 * one.entries.len());
        let factors: Vec<f64> = two.entries.iter().map(|e| e.factor).collect();
        assert!(factors.iter().any(|&f| (f - 0.81).abs() < 1e-12));
        assert!(factors.iter().any(|&f| (f - 0.99).abs() < 1e-12));
    }

    #[test]
    fn provenance_round_trips_through_reload() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path());
        let out = dir.path().join("aug");
        let plan = AugmentationPlan {
            target_speaker_id: "D01".into(),
            mode: AugMode::Speed,
            sd_factor: 0.85,
            multiplicity: 2,
            output_dir: out.display().to_string(),
            checkpoint_path: None,
        };
        let result = run_augmentation(&manifest, &plan).unwrap();
        let reloaded = load_augmented_manifest(&result.manifest_path).unwrap();
        assert_eq!(reloaded, result.entries);
    }

    #[test]
    fn gan_mode_without_checkpoint_rejected_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path());
        let out = dir.path().join("aug");
        let plan = AugmentationPlan {
            target_speaker_id: "D01".into(),
            mode: AugMode::SpeedGan,
            sd_factor: 0.8,
            multiplicity: 1,
            output_dir: out.display().to_string(),
            checkpoint_path: None,
        };
        assert!(matches!(
            run_augmentation(&manifest, &plan),
            Err(PipelineError::PlanInvalid(_))
        ));
        assert!(!out.exists(), "no output should be created");
    }

    #[test]
    fn out_of_band_composed_factor_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path());
        let plan = AugmentationPlan {
            target_speaker_id: "D01".into(),
            mode: AugMode::Speed,
            sd_factor: 0.52,
            multiplicity: 2, // 0.52 * 0.9 < 0.5
            output_dir: dir.path().join("aug").display().to_string(),
            checkpoint_path: None,
        };
        assert!(matches!(
            run_augmentation(&manifest, &plan),
            Err(PipelineError::PlanInvalid(_))
        ));
    }

    #[test]
    fn rerun_overwrites_identically() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path());
        let out = dir.path().join("aug");
        let plan = AugmentationPlan {
            target_speaker_id: "D01".into(),
            mode: AugMode::Tempo,
            sd_factor: 0.9,
            multiplicity: 1,
            output_dir: out.display().to_string(),
            checkpoint_path: None,
        };
        let a = run_augmentation(&manifest, &plan).unwrap();
        let bytes_a: Vec<Vec<u8>> = a
            .entries
            .iter()
            .map(|e| std::fs::read(out.join(&e.feature_path)).unwrap())
            .collect();
        let b = run_augmentation(&manifest, &plan).unwrap();
        let bytes_b: Vec<Vec<u8>> = b
            .entries
            .iter()
            .map(|e| std::fs::read(out.join(&e.feature_path)).unwrap())
            .collect();
        assert_eq!(a.entries, b.entries);
        assert_eq!(bytes_a, bytes_b);
    }
}
