//! RIFF/WAVE reader and writer: 16-bit signed little-endian PCM, mono only.
//!
//! Anything else (extra channels, float or compressed encodings, missing
//! chunks) is rejected with a diagnostic naming the offending chunk.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::AudioClip;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file: bad {chunk} chunk")]
    BadChunk { chunk: &'static str },
    #[error("truncated file while reading {chunk} chunk")]
    Truncated { chunk: String },
    #[error("fmt chunk declares {channels} channels; only mono is supported")]
    NotMono { channels: u16 },
    #[error("fmt chunk declares format tag {format_tag}; only PCM (1) is supported")]
    NotPcm { format_tag: u16 },
    #[error("fmt chunk declares {bits} bits per sample; only 16 is supported")]
    NotSixteenBit { bits: u16 },
    #[error("missing required chunk: {chunk}")]
    MissingChunk { chunk: &'static str },
}

pub fn read_wav(path: &Path) -> Result<AudioClip, WavError> {
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(WavError::BadChunk { chunk: "RIFF" });
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(WavError::BadChunk { chunk: "WAVE" });
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut off = 12usize;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
        let body_start = off + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(WavError::Truncated {
                chunk: String::from_utf8_lossy(id).into_owned(),
            });
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(WavError::Truncated {
                        chunk: "fmt ".into(),
                    });
                }
                let tag = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {} // skip unknown chunks (LIST, fact, ...)
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        off = body_end + (size & 1);
    }

    let (tag, channels, rate, bits) = fmt.ok_or(WavError::MissingChunk { chunk: "fmt " })?;
    if tag != 1 {
        return Err(WavError::NotPcm { format_tag: tag });
    }
    if channels != 1 {
        return Err(WavError::NotMono { channels });
    }
    if bits != 16 {
        return Err(WavError::NotSixteenBit { bits });
    }
    let data = data.ok_or(WavError::MissingChunk { chunk: "data" })?;

    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    Ok(AudioClip::new(samples, rate))
}

pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<(), WavError> {
    let bytes = encode_wav(clip);
    let mut file = fs::File::create(path).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&bytes).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let n = clip.samples.len();
    let data_size = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_samples_to_quantization() {
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 0.999, -1.0], 16000);
        let bytes = encode_wav(&clip);
        let back = parse_wav(&bytes).unwrap();
        assert_eq!(back.sample_rate_hz, 16000);
        assert_eq!(back.len(), clip.len());
        for (a, b) in clip.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1.0 / 32000.0, "{a} vs {b}");
        }
    }

    #[test]
    fn stereo_rejected_with_channel_count() {
        let clip = AudioClip::new(vec![0.1; 8], 8000);
        let mut bytes = encode_wav(&clip);
        bytes[22] = 2; // channel count in fmt chunk
        match parse_wav(&bytes) {
            Err(WavError::NotMono { channels: 2 }) => {}
            other => panic!("expected NotMono, got {other:?}"),
        }
    }

    #[test]
    fn float_pcm_rejected_with_format_tag() {
        let clip = AudioClip::new(vec![0.1; 8], 8000);
        let mut bytes = encode_wav(&clip);
        bytes[20] = 3; // IEEE float tag
        match parse_wav(&bytes) {
            Err(WavError::NotPcm { format_tag: 3 }) => {}
            other => panic!("expected NotPcm, got {other:?}"),
        }
    }

    #[test]
    fn garbage_rejected() {
        assert!(matches!(
            parse_wav(b"not a wav file at all.........."),
            Err(WavError::BadChunk { chunk: "RIFF" })
        ));
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let clip = AudioClip::new(vec![0.25; 16], 16000);
        let bytes = encode_wav(&clip);
        // Splice a LIST chunk between fmt and data.
        let mut spliced = bytes[..36].to_vec();
        spliced.extend_from_slice(b"LIST");
        spliced.extend_from_slice(&4u32.to_le_bytes());
        spliced.extend_from_slice(b"INFO");
        spliced.extend_from_slice(&bytes[36..]);
        let riff_size = (spliced.len() - 8) as u32;
        spliced[4..8].copy_from_slice(&riff_size.to_le_bytes());
        let back = parse_wav(&spliced).unwrap();
        assert_eq!(back.len(), 16);
    }
}
