//! FBK1 feature files: magic `FBK1`, little-endian u32 frame and bin counts,
//! row-major f32 values, then a UTF-8 footer `speaker=<id>\nutt=<id>\n`.
//! A text escape hatch emits one frame per line at 9 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{FbankMatrix, FeatureError};

const MAGIC: &[u8; 4] = b"FBK1";

pub fn write_feature_file(path: &Path, mat: &FbankMatrix) -> Result<(), FeatureError> {
    let bytes = encode(mat);
    let mut file = fs::File::create(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&bytes).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn encode(mat: &FbankMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + mat.data.len() * 4 + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(mat.n_frames as u32).to_le_bytes());
    out.extend_from_slice(&(mat.n_bins as u32).to_le_bytes());
    for &v in &mat.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.extend_from_slice(format!("speaker={}\nutt={}\n", mat.speaker_id, mat.utterance_id).as_bytes());
    out
}

pub fn read_feature_file(path: &Path) -> Result<FbankMatrix, FeatureError> {
    let bytes = fs::read(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes).map_err(|reason| FeatureError::BadFeatureFile {
        path: path.display().to_string(),
        reason,
    })
}

pub fn decode(bytes: &[u8]) -> Result<FbankMatrix, String> {
    if bytes.len() < 12 {
        return Err("file shorter than the 12-byte header".into());
    }
    if &bytes[0..4] != MAGIC {
        return Err(format!("bad magic {:?}, expected \"FBK1\"", &bytes[0..4]));
    }
    let n_frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n_bins = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let data_len = n_frames
        .checked_mul(n_bins)
        .and_then(|n| n.checked_mul(4))
        .ok_or("frame/bin counts overflow")?;
    let data_end = 12 + data_len;
    if bytes.len() < data_end {
        return Err(format!(
            "truncated data section: need {} bytes, have {}",
            data_end,
            bytes.len()
        ));
    }
    let data: Vec<f64> = bytes[12..data_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();

    let footer = std::str::from_utf8(&bytes[data_end..]).map_err(|_| "footer is not UTF-8")?;
    let mut speaker_id = None;
    let mut utterance_id = None;
    for line in footer.lines() {
        if let Some(v) = line.strip_prefix("speaker=") {
            speaker_id = Some(v.to_string());
        } else if let Some(v) = line.strip_prefix("utt=") {
            utterance_id = Some(v.to_string());
        }
    }
    let speaker_id = speaker_id.ok_or("footer missing speaker= line")?;
    let utterance_id = utterance_id.ok_or("footer missing utt= line")?;

    Ok(FbankMatrix {
        data,
        n_frames,
        n_bins,
        frame_shift_sec: 0.010,
        speaker_id,
        utterance_id,
    })
}

/// One frame per line, space-separated, 9 significant digits.
pub fn write_feature_text(path: &Path, mat: &FbankMatrix) -> Result<(), FeatureError> {
    let mut text = String::new();
    for t in 0..mat.n_frames {
        let row: Vec<String> = mat.row(t).iter().map(|v| format!("{v:.8e}")).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}
