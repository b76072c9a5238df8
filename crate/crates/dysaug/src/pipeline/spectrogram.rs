//! Spectrogram dumps for eyeballing augmentation output: CSV (one frame per
//! line) or 8-bit PGM with the value range recorded in a header comment.

use std::path::Path;

use crate::features::FbankMatrix;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Pgm,
}

impl std::str::FromStr for DumpFormat {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DumpFormat::Csv),
            "pgm" => Ok(DumpFormat::Pgm),
            other => Err(PipelineError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn spectrogram_dump(
    mat: &FbankMatrix,
    out_path: &Path,
    format: DumpFormat,
) -> Result<(), PipelineError> {
    let bytes = match format {
        DumpFormat::Csv => encode_csv(mat).into_bytes(),
        DumpFormat::Pgm => encode_pgm(mat),
    };
    std::fs::write(out_path, bytes).map_err(|source| PipelineError::Io {
        path: out_path.display().to_string(),
        source,
    })
}

pub fn encode_csv(mat: &FbankMatrix) -> String {
    let mut text = String::new();
    for t in 0..mat.n_frames {
        let row: Vec<String> = mat.row(t).iter().map(|v| format!("{v:.8e}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Binary (P5) PGM. Rows run from the highest mel bin at the top to bin 0 at
/// the bottom; columns are frames. Pixels map the value range onto [0, 255].
pub fn encode_pgm(mat: &FbankMatrix) -> Vec<u8> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &mat.data {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let mut out = Vec::with_capacity(64 + mat.n_frames * mat.n_bins);
    out.extend_from_slice(
        format!(
            "P5\n# min={lo:.6e} max={hi:.6e}\n{} {}\n255\n",
            mat.n_frames, mat.n_bins
        )
        .as_bytes(),
    );
    for row in (0..mat.n_bins).rev() {
        for t in 0..mat.n_frames {
            let v = mat.row(t)[row];
            let pixel = if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            };
            out.push(pixel);
        }
    }
    out
}
