//! Waveform-similarity overlap-add time-scale modification.
//!
//! The signal is cut into overlapping analysis blocks. Block m nominally
//! starts at `round(m * Hs * alpha)` (analysis hop `H_alpha = alpha * Hs`);
//! a shift `delta in [-delta_max, delta_max]` is chosen per block to maximize
//! cross-correlation against the natural continuation of the previously
//! copied block. Chosen blocks are Hann-windowed and overlap-added at the
//! synthesis hop `Hs`, then rescaled by the accumulated window sum.

use crate::dsp::{lag_search_order, AudioClip, WindowFn};

use super::{PerturbError, MAX_FACTOR, MIN_FACTOR};

/// WSOLA block geometry. Defaults: 40 ms blocks, 50% overlap, 10 ms search.
#[derive(Debug, Clone)]
pub struct WsolaConfig {
    /// Analysis/synthesis block length in samples.
    pub block_len: usize,
    /// Synthesis hop `Hs` in samples.
    pub synthesis_hop: usize,
    /// Half-width of the block search region in samples.
    pub delta_max: usize,
    pub window: WindowFn,
}

impl WsolaConfig {
    pub fn for_sample_rate(sample_rate_hz: u32) -> Self {
        let mut block_len = (sample_rate_hz as f64 * 0.040).round() as usize;
        if block_len % 2 == 1 {
            block_len += 1;
        }
        let block_len = block_len.max(4);
        Self {
            block_len,
            synthesis_hop: block_len / 2,
            delta_max: (sample_rate_hz as f64 * 0.010).round() as usize,
            window: WindowFn::hann(block_len),
        }
    }

    fn validate(&self) -> Result<(), PerturbError> {
        if self.block_len == 0 || self.synthesis_hop == 0 {
            return Err(PerturbError::BadWsolaConfig(
                "block length and synthesis hop must be positive".into(),
            ));
        }
        if self.synthesis_hop > self.block_len {
            return Err(PerturbError::BadWsolaConfig(format!(
                "synthesis hop {} exceeds block length {} (blocks must overlap)",
                self.synthesis_hop, self.block_len
            )));
        }
        if self.window.length != self.block_len {
            return Err(PerturbError::BadWsolaConfig(format!(
                "window length {} does not match block length {}",
                self.window.length, self.block_len
            )));
        }
        Ok(())
    }
}

const OVERLAP_NORM_FLOOR: f64 = 1e-3;

/// Tempo perturbation: changes duration by `1/alpha` while keeping pitch.
pub fn tempo_perturb(
    clip: &AudioClip,
    alpha: f64,
    cfg: &WsolaConfig,
) -> Result<AudioClip, PerturbError> {
    clip.validate()?;
    cfg.validate()?;
    if !(MIN_FACTOR..=MAX_FACTOR).contains(&alpha) || !alpha.is_finite() {
        return Err(PerturbError::FactorOutOfRange(alpha));
    }
    let x = &clip.samples;
    let n = x.len();
    let block = cfg.block_len;
    if n <= block {
        return Err(PerturbError::ClipTooShort {
            utterance: clip.utterance_id.clone(),
            samples: n,
            block_len: block,
        });
    }

    let hs = cfg.synthesis_hop;
    let analysis_hop = hs as f64 * alpha;
    // Consecutive search regions must not swap order.
    let delta_max = cfg
        .delta_max
        .min((analysis_hop.floor() as usize).saturating_sub(1));

    let target_len = (n as f64 / alpha).round() as usize;
    let n_blocks = if target_len <= block {
        1
    } else {
        (target_len - block).div_ceil(hs) + 1
    };

    let window = cfg.window.values();
    let ola_len = (n_blocks - 1) * hs + block;
    let mut acc = vec![0.0f64; ola_len];
    let mut wsum = vec![0.0f64; ola_len];

    let max_start = n - block;
    // First block is copied verbatim to anchor the iteration.
    let mut prev_start = 0usize;
    overlap_add(&mut acc, &mut wsum, x, prev_start, 0, &window);

    for m in 1..n_blocks {
        let nominal = ((m as f64 * analysis_hop).round() as usize).min(max_start);
        // Natural continuation of the previous block, one synthesis hop on.
        let ref_start = (prev_start + hs).min(max_start);
        let chosen = best_shift(x, block, nominal, ref_start, delta_max, max_start);
        overlap_add(&mut acc, &mut wsum, x, chosen, m * hs, &window);
        prev_start = chosen;
    }

    let mut out = Vec::with_capacity(target_len);
    for i in 0..target_len.min(ola_len) {
        out.push(acc[i] / wsum[i].max(OVERLAP_NORM_FLOOR));
    }
    out.resize(target_len, 0.0);

    Ok(AudioClip {
        samples: out,
        sample_rate_hz: clip.sample_rate_hz,
        speaker_id: clip.speaker_id.clone(),
        utterance_id: clip.utterance_id.clone(),
    })
}

/// Scans shifts in tie-break order (0, -1, +1, ...) and returns the block
/// start maximizing correlation with the reference continuation.
fn best_shift(
    x: &[f64],
    block: usize,
    nominal: usize,
    ref_start: usize,
    delta_max: usize,
    max_start: usize,
) -> usize {
    let reference = &x[ref_start..ref_start + block];
    let mut best_start = nominal;
    let mut best_score = f64::NEG_INFINITY;
    for delta in lag_search_order(delta_max as isize) {
        let cand = nominal as isize + delta;
        if cand < 0 || cand as usize > max_start {
            continue;
        }
        let cand = cand as usize;
        let segment = &x[cand..cand + block];
        let score: f64 = reference.iter().zip(segment).map(|(r, s)| r * s).sum();
        if score > best_score {
            best_score = score;
            best_start = cand;
        }
    }
    best_start
}

fn overlap_add(
    acc: &mut [f64],
    wsum: &mut [f64],
    x: &[f64],
    src_start: usize,
    dst_start: usize,
    window: &[f64],
) {
    for (r, &w) in window.iter().enumerate() {
        acc[dst_start + r] += w * x[src_start + r];
        wsum[dst_start + r] += w;
    }
}
