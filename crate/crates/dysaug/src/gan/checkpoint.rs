//! DGAN checkpoint files.
//!
//! Layout: magic `DGAN`, u32 version, length-prefixed UTF-8 speaker id,
//! u32 crop_frames, u64 iteration, f64 lr_current, then shape-prefixed
//! float32 blocks in fixed declaration order: 8 generator blocks, 10
//! discriminator blocks, then first/second Adam moments for each parameter
//! block, then per-block u64 Adam step counters. Loading refuses version or
//! shape mismatches.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::neural::AdamState;

use super::model::{DiscriminatorNet, GeneratorNet, FREQ_BINS};
use super::GanError;

const MAGIC: &[u8; 4] = b"DGAN";
pub const FORMAT_VERSION: u32 = 1;

pub const GEN_BLOCK_NAMES: [&str; 8] = [
    "gen.conv1.weight",
    "gen.conv1.bias",
    "gen.conv2.weight",
    "gen.conv2.bias",
    "gen.conv3.weight",
    "gen.conv3.bias",
    "gen.conv4.weight",
    "gen.conv4.bias",
];

pub const DISC_BLOCK_NAMES: [&str; 10] = [
    "disc.conv1.weight",
    "disc.conv1.bias",
    "disc.conv2.weight",
    "disc.conv2.bias",
    "disc.conv3.weight",
    "disc.conv3.bias",
    "disc.conv4.weight",
    "disc.conv4.bias",
    "disc.fc.weight",
    "disc.fc.bias",
];

/// Serialized GAN training state for one target speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct GanCheckpoint {
    pub format_version: u32,
    pub target_speaker_id: String,
    pub crop_frames: usize,
    pub iteration: u64,
    pub lr_current: f64,
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub adam_states: Vec<AdamState>,
}

impl PartialEq for GeneratorNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights == b.weights && a.bias == b.bias)
    }
}

impl PartialEq for DiscriminatorNet {
    fn eq(&self, other: &Self) -> bool {
        self.crop_frames == other.crop_frames
            && self.freq_bins == other.freq_bins
            && self
                .convs
                .iter()
                .zip(&other.convs)
                .all(|(a, b)| a.weights == b.weights && a.bias == b.bias)
            && self.fc.weights == other.fc.weights
            && self.fc.bias == other.fc.bias
    }
}

impl GanCheckpoint {
    /// Parameter blocks in declaration order: (name, dims, data).
    fn blocks(&self) -> Vec<(String, Vec<u32>, Vec<f64>)> {
        let mut blocks = Vec::new();
        for (i, layer) in self.generator.layers.iter().enumerate() {
            blocks.push((
                GEN_BLOCK_NAMES[i * 2].to_string(),
                vec![
                    layer.out_ch as u32,
                    layer.in_ch as u32,
                    layer.kernel.0 as u32,
                    layer.kernel.1 as u32,
                ],
                layer.weights.clone(),
            ));
            blocks.push((
                GEN_BLOCK_NAMES[i * 2 + 1].to_string(),
                vec![layer.out_ch as u32],
                layer.bias.clone(),
            ));
        }
        for (i, layer) in self.discriminator.convs.iter().enumerate() {
            blocks.push((
                DISC_BLOCK_NAMES[i * 2].to_string(),
                vec![
                    layer.out_ch as u32,
                    layer.in_ch as u32,
                    layer.kernel.0 as u32,
                    layer.kernel.1 as u32,
                ],
                layer.weights.clone(),
            ));
            blocks.push((
                DISC_BLOCK_NAMES[i * 2 + 1].to_string(),
                vec![layer.out_ch as u32],
                layer.bias.clone(),
            ));
        }
        blocks.push((
            "disc.fc.weight".into(),
            vec![
                self.discriminator.fc.out_dim as u32,
                self.discriminator.fc.in_dim as u32,
            ],
            self.discriminator.fc.weights.clone(),
        ));
        blocks.push((
            "disc.fc.bias".into(),
            vec![self.discriminator.fc.out_dim as u32],
            self.discriminator.fc.bias.clone(),
        ));
        blocks
    }
}

fn push_block(out: &mut Vec<u8>, dims: &[u32], data: &[f64]) {
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode(ckpt: &GanCheckpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ckpt.format_version.to_le_bytes());
    let speaker = ckpt.target_speaker_id.as_bytes();
    out.extend_from_slice(&(speaker.len() as u32).to_le_bytes());
    out.extend_from_slice(speaker);
    out.extend_from_slice(&(ckpt.crop_frames as u32).to_le_bytes());
    out.extend_from_slice(&ckpt.iteration.to_le_bytes());
    out.extend_from_slice(&ckpt.lr_current.to_le_bytes());

    let blocks = ckpt.blocks();
    for (_, dims, data) in &blocks {
        push_block(&mut out, dims, data);
    }
    for (i, state) in ckpt.adam_states.iter().enumerate() {
        let len = blocks[i].2.len() as u32;
        push_block(&mut out, &[len], &state.first_moment);
        push_block(&mut out, &[len], &state.second_moment);
    }
    for state in &ckpt.adam_states {
        out.extend_from_slice(&state.step.to_le_bytes());
    }
    out
}

pub fn write_checkpoint(path: &Path, ckpt: &GanCheckpoint) -> Result<(), GanError> {
    let bytes = encode(ckpt);
    let mut file = fs::File::create(path).map_err(|source| GanError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&bytes).map_err(|source| GanError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], String> {
        if self.pos + n > self.bytes.len() {
            return Err(format!("truncated while reading {what}"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// Reads one shape-prefixed f32 block and checks it against `expect_dims`.
    fn block(&mut self, name: &str, expect_dims: &[u32]) -> Result<Vec<f64>, String> {
        let ndim = self.u32(name)? as usize;
        if ndim != expect_dims.len() {
            return Err(format!(
                "block {name}: expected {} dims, file has {ndim}",
                expect_dims.len()
            ));
        }
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(self.u32(name)?);
        }
        if dims != expect_dims {
            return Err(format!(
                "block {name}: shape mismatch, expected {expect_dims:?}, file has {dims:?}"
            ));
        }
        let count: usize = dims.iter().map(|&d| d as usize).product();
        let raw = self.take(count * 4, name)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

pub fn read_checkpoint(path: &Path) -> Result<GanCheckpoint, GanError> {
    let bytes = fs::read(path).map_err(|source| GanError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes).map_err(|reason| GanError::BadCheckpoint {
        path: path.display().to_string(),
        reason,
    })
}

pub fn decode(bytes: &[u8]) -> Result<GanCheckpoint, String> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(format!("bad magic {magic:?}, expected \"DGAN\""));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        ));
    }
    let speaker_len = r.u32("speaker length")? as usize;
    let speaker = std::str::from_utf8(r.take(speaker_len, "speaker id")?)
        .map_err(|_| "speaker id is not UTF-8".to_string())?
        .to_string();
    let crop_frames = r.u32("crop_frames")? as usize;
    let iteration = r.u64("iteration")?;
    let lr_current = r.f64("lr_current")?;

    let mut generator = GeneratorNet::new();
    let mut discriminator =
        DiscriminatorNet::new(FREQ_BINS, crop_frames).map_err(|e| e.to_string())?;

    for (i, layer) in generator.layers.iter_mut().enumerate() {
        let wdims = [
            layer.out_ch as u32,
            layer.in_ch as u32,
            layer.kernel.0 as u32,
            layer.kernel.1 as u32,
        ];
        layer.weights = r.block(GEN_BLOCK_NAMES[i * 2], &wdims)?;
        layer.bias = r.block(GEN_BLOCK_NAMES[i * 2 + 1], &[layer.out_ch as u32])?;
    }
    for (i, layer) in discriminator.convs.iter_mut().enumerate() {
        let wdims = [
            layer.out_ch as u32,
            layer.in_ch as u32,
            layer.kernel.0 as u32,
            layer.kernel.1 as u32,
        ];
        layer.weights = r.block(DISC_BLOCK_NAMES[i * 2], &wdims)?;
        layer.bias = r.block(DISC_BLOCK_NAMES[i * 2 + 1], &[layer.out_ch as u32])?;
    }
    let fc_dims = [
        discriminator.fc.out_dim as u32,
        discriminator.fc.in_dim as u32,
    ];
    discriminator.fc.weights = r.block("disc.fc.weight", &fc_dims)?;
    discriminator.fc.bias = r.block("disc.fc.bias", &[discriminator.fc.out_dim as u32])?;

    let block_lens: Vec<usize> = {
        let ckpt_tmp = GanCheckpoint {
            format_version: version,
            target_speaker_id: speaker.clone(),
            crop_frames,
            iteration,
            lr_current,
            generator: generator.clone(),
            discriminator: discriminator.clone(),
            adam_states: Vec::new(),
        };
        ckpt_tmp.blocks().iter().map(|(_, _, d)| d.len()).collect()
    };

    let mut adam_states = Vec::with_capacity(block_lens.len());
    for (i, &len) in block_lens.iter().enumerate() {
        let m = r.block(&format!("adam[{i}].m"), &[len as u32])?;
        let v = r.block(&format!("adam[{i}].v"), &[len as u32])?;
        let mut state = AdamState::new(len, lr_current);
        state.first_moment = m;
        state.second_moment = v;
        adam_states.push(state);
    }
    for state in adam_states.iter_mut() {
        state.step = r.u64("adam step")?;
    }
    if r.pos != bytes.len() {
        return Err(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.pos
        ));
    }

    Ok(GanCheckpoint {
        format_version: version,
        target_speaker_id: speaker,
        crop_frames,
        iteration,
        lr_current,
        generator,
        discriminator,
        adam_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> GanCheckpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let generator = GeneratorNet::init(&mut rng);
        let discriminator = DiscriminatorNet::init(FREQ_BINS, 64, &mut rng).unwrap();
        let mut ckpt = GanCheckpoint {
            format_version: FORMAT_VERSION,
            target_speaker_id: "D07".into(),
            crop_frames: 64,
            iteration: 1234,
            lr_current: 1e-4,
            generator,
            discriminator,
            adam_states: Vec::new(),
        };
        ckpt.adam_states = ckpt
            .blocks()
            .iter()
            .map(|(_, _, d)| {
                let mut s = AdamState::new(d.len(), 1e-4);
                s.step = 1234;
                for (i, m) in s.first_moment.iter_mut().enumerate() {
                    *m = (i as f64 * 0.01).sin() as f32 as f64;
                }
                s
            })
            .collect();
        ckpt
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = sample_checkpoint();
        let bytes = encode(&ckpt);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.target_speaker_id, "D07");
        assert_eq!(back.iteration, 1234);
        assert_eq!(back.crop_frames, 64);
        let bytes2 = encode(&back);
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn corrupted_magic_rejected() {
        let mut bytes = encode(&sample_checkpoint());
        bytes[1] = b'X';
        assert!(decode(&bytes).unwrap_err().contains("bad magic"));
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut bytes = encode(&sample_checkpoint());
        bytes[4] = 9;
        assert!(decode(&bytes).unwrap_err().contains("version"));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let ckpt = sample_checkpoint();
        let mut bytes = encode(&ckpt);
        // Corrupt the first block's out_ch dim (after magic, version,
        // speaker, crop, iteration, lr: 4+4+4+3+4+8+8 = 35, then ndim u32).
        let dim_pos = 35 + 4;
        bytes[dim_pos] = 7;
        assert!(decode(&bytes).unwrap_err().contains("shape mismatch"));
    }

    #[test]
    fn truncated_file_rejected() {
        let bytes = encode(&sample_checkpoint());
        assert!(decode(&bytes[..bytes.len() - 3]).unwrap_err().contains("truncated"));
    }
}
