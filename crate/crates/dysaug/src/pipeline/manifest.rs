//! JSON-lines corpus manifest: one utterance per line, audio paths resolved
//! relative to the manifest file.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::wav::read_wav;
use crate::dsp::AudioClip;
use crate::gan::CorpusUtterance;
use crate::perturb::{
    parse_alignment_file, sd_factor, speaker_duration_stats, AlignmentRecord, SpeakerDurationStats,
};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Control,
    Disordered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    pub word_id: String,
    pub role: Role,
    pub audio_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_ref: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    /// Loads and validates: unique utterance ids, every audio path resolvable.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry =
                serde_json::from_str(line).map_err(|e| PipelineError::ManifestParse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            if !seen.insert(entry.utterance_id.clone()) {
                return Err(PipelineError::DuplicateUtterance(entry.utterance_id));
            }
            entries.push(entry);
        }
        let manifest = Self { entries, base_dir };
        for entry in &manifest.entries {
            let p = manifest.resolve(&entry.audio_path);
            if !p.is_file() {
                return Err(PipelineError::MissingAudio {
                    utterance_id: entry.utterance_id.clone(),
                    path: p.display().to_string(),
                });
            }
        }
        Ok(manifest)
    }

    pub fn save(path: &Path, entries: &[ManifestEntry]) -> Result<(), PipelineError> {
        let mut text = String::new();
        for entry in entries {
            text.push_str(&serde_json::to_string(entry).expect("manifest entries serialize"));
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_clip(&self, entry: &ManifestEntry) -> Result<AudioClip, PipelineError> {
        let clip = read_wav(&self.resolve(&entry.audio_path))?;
        Ok(clip.with_ids(&entry.speaker_id, &entry.utterance_id))
    }

    pub fn entries_for_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    pub fn entries_for_speaker(&self, speaker: &str) -> impl Iterator<Item = &ManifestEntry> + '_ {
        let speaker = speaker.to_string();
        self.entries.iter().filter(move |e| e.speaker_id == speaker)
    }

    /// Control-side and one-target-speaker corpora with audio loaded,
    /// both sorted by utterance id.
    pub fn load_corpora(
        &self,
        target_speaker: &str,
    ) -> Result<(Vec<CorpusUtterance>, Vec<CorpusUtterance>), PipelineError> {
        let mut control = Vec::new();
        let mut target = Vec::new();
        let mut sorted: Vec<&ManifestEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        for entry in sorted {
            let is_target = entry.role == Role::Disordered && entry.speaker_id == target_speaker;
            if entry.role == Role::Control || is_target {
                let clip = self.load_clip(entry)?;
                let utt = CorpusUtterance {
                    utterance_id: entry.utterance_id.clone(),
                    speaker_id: entry.speaker_id.clone(),
                    word_id: entry.word_id.clone(),
                    clip,
                };
                if is_target {
                    target.push(utt);
                } else {
                    control.push(utt);
                }
            }
        }
        if control.is_empty() {
            return Err(PipelineError::NoControlUtterances);
        }
        if target.is_empty() {
            return Err(PipelineError::NoTargetUtterances(target_speaker.to_string()));
        }
        Ok((control, target))
    }

    /// Alignment records per speaker, read from each entry's alignment_ref.
    pub fn load_alignments(&self) -> Result<BTreeMap<String, Vec<AlignmentRecord>>, PipelineError> {
        let mut files: BTreeMap<String, HashSet<PathBuf>> = BTreeMap::new();
        for entry in &self.entries {
            if let Some(r) = &entry.alignment_ref {
                files
                    .entry(entry.speaker_id.clone())
                    .or_default()
                    .insert(self.resolve(r));
            }
        }
        let mut out = BTreeMap::new();
        for (speaker, paths) in files {
            let mut paths: Vec<PathBuf> = paths.into_iter().collect();
            paths.sort();
            let mut records = Vec::new();
            for p in paths {
                records.extend(parse_alignment_file(&p)?);
            }
            out.insert(speaker, records);
        }
        Ok(out)
    }
}

/// One row of the per-speaker duration/factor table.
#[derive(Debug, Clone, Serialize)]
pub struct FactorRow {
    pub speaker_id: String,
    pub role: Role,
    pub mean_phone_dur_sec: f64,
    pub phone_count: usize,
    /// Speaker-dependent perturbation factor; disordered speakers only.
    pub sd_factor: Option<f64>,
}

/// Per-speaker duration stats and speaker-dependent factors from a manifest
/// with alignment references.
pub fn speaker_factor_table(
    manifest: &Manifest,
    silence_labels: &std::collections::HashSet<String>,
) -> Result<Vec<FactorRow>, PipelineError> {
    let alignments = manifest.load_alignments()?;
    let mut roles: BTreeMap<String, Role> = BTreeMap::new();
    for e in &manifest.entries {
        roles.entry(e.speaker_id.clone()).or_insert(e.role);
    }

    let mut control_stats: Vec<SpeakerDurationStats> = Vec::new();
    let mut all_stats: BTreeMap<String, SpeakerDurationStats> = BTreeMap::new();
    for (speaker, records) in &alignments {
        let stats = speaker_duration_stats(speaker, records, silence_labels)?;
        if roles.get(speaker) == Some(&Role::Control) {
            control_stats.push(stats.clone());
        }
        all_stats.insert(speaker.clone(), stats);
    }

    let mut rows = Vec::new();
    for (speaker, stats) in &all_stats {
        let role = *roles.get(speaker).unwrap_or(&Role::Control);
        let factor = if role == Role::Disordered && !control_stats.is_empty() {
            Some(sd_factor(&control_stats, stats)?)
        } else {
            None
        };
        rows.push(FactorRow {
            speaker_id: speaker.clone(),
            role,
            mean_phone_dur_sec: stats.mean_phone_dur_sec,
            phone_count: stats.phone_count,
            sd_factor: factor,
        });
    }
    Ok(rows)
}
