//! Phone alignments and duration-based speaker-dependent factors.
//!
//! Alignment files are tab-separated text, one phone per line:
//! `utterance_id<TAB>phone<TAB>start_sec<TAB>end_sec`, sorted within an
//! utterance. Silence labels are filtered out when averaging durations.

use std::collections::HashSet;
use std::path::Path;

use super::PerturbError;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentEntry {
    pub phone: String,
    pub start_sec: f64,
    pub end_sec: f64,
}

/// Per-utterance phone segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRecord {
    pub utterance_id: String,
    pub entries: Vec<AlignmentEntry>,
}

/// Mean non-silence phone duration for one speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerDurationStats {
    pub speaker_id: String,
    pub mean_phone_dur_sec: f64,
    pub phone_count: usize,
}

pub fn parse_alignment_file(path: &Path) -> Result<Vec<AlignmentRecord>, PerturbError> {
    let text = std::fs::read_to_string(path).map_err(|e| PerturbError::AlignmentParse {
        line: 0,
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_alignments(&text)
}

/// Parses alignment text; malformed lines abort with their 1-based number.
pub fn parse_alignments(text: &str) -> Result<Vec<AlignmentRecord>, PerturbError> {
    let mut records: Vec<AlignmentRecord> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(PerturbError::AlignmentParse {
                line: line_no,
                reason: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let start_sec: f64 = fields[2].parse().map_err(|_| PerturbError::AlignmentParse {
            line: line_no,
            reason: format!("bad start time {:?}", fields[2]),
        })?;
        let end_sec: f64 = fields[3].parse().map_err(|_| PerturbError::AlignmentParse {
            line: line_no,
            reason: format!("bad end time {:?}", fields[3]),
        })?;
        if !(end_sec > start_sec) {
            return Err(PerturbError::AlignmentParse {
                line: line_no,
                reason: format!("end {end_sec} not after start {start_sec}"),
            });
        }
        let entry = AlignmentEntry {
            phone: fields[1].to_string(),
            start_sec,
            end_sec,
        };
        match records.last_mut() {
            Some(rec) if rec.utterance_id == fields[0] => {
                let prev_end = rec.entries.last().map(|e| e.end_sec).unwrap_or(0.0);
                if entry.start_sec < prev_end - 1e-9 {
                    return Err(PerturbError::AlignmentParse {
                        line: line_no,
                        reason: format!(
                            "entry starting at {} overlaps previous ending at {prev_end}",
                            entry.start_sec
                        ),
                    });
                }
                rec.entries.push(entry);
            }
            _ => records.push(AlignmentRecord {
                utterance_id: fields[0].to_string(),
                entries: vec![entry],
            }),
        }
    }
    Ok(records)
}

/// Average non-silence phone duration across all records of one speaker.
pub fn speaker_duration_stats(
    speaker_id: &str,
    alignments: &[AlignmentRecord],
    silence_labels: &HashSet<String>,
) -> Result<SpeakerDurationStats, PerturbError> {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for rec in alignments {
        for e in &rec.entries {
            if silence_labels.contains(&e.phone) {
                continue;
            }
            total += e.end_sec - e.start_sec;
            count += 1;
        }
    }
    if count == 0 {
        return Err(PerturbError::NoNonSilencePhones {
            records: alignments.len(),
        });
    }
    Ok(SpeakerDurationStats {
        speaker_id: speaker_id.to_string(),
        mean_phone_dur_sec: total / count as f64,
        phone_count: count,
    })
}

/// Speaker-dependent perturbation factor: mean control phone duration over
/// the target speaker's mean phone duration. Slower targets yield factors
/// below one, lengthening the perturbed control speech.
pub fn sd_factor(
    control_stats: &[SpeakerDurationStats],
    target: &SpeakerDurationStats,
) -> Result<f64, PerturbError> {
    if control_stats.is_empty() {
        return Err(PerturbError::EmptyControlList);
    }
    for s in control_stats {
        if s.mean_phone_dur_sec <= 0.0 {
            return Err(PerturbError::NonPositiveDuration(s.speaker_id.clone()));
        }
    }
    if target.mean_phone_dur_sec <= 0.0 {
        return Err(PerturbError::NonPositiveDuration(target.speaker_id.clone()));
    }
    let control_avg = control_stats
        .iter()
        .map(|s| s.mean_phone_dur_sec)
        .sum::<f64>()
        / control_stats.len() as f64;
    Ok(control_avg / target.mean_phone_dur_sec)
}
