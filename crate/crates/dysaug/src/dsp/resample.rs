//! Band-limited resampling by windowed-sinc interpolation.
//!
//! Implements `y[t] = x(ratio * t)` with a Kaiser-windowed sinc kernel
//! (16 taps per side at unit cutoff, beta = 8.6). For ratios above 1 the
//! kernel cutoff drops to `1/ratio` so the output stays alias-free.

use super::{AudioClip, DspError};

const HALF_TAPS: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;

pub const MIN_RATIO: f64 = 0.5;
pub const MAX_RATIO: f64 = 2.0;

/// Resamples `clip` so that `output[t] = input(ratio * t)`.
///
/// Output length is `round(len / ratio)`; a pure tone at f0 moves to
/// `ratio * f0`. The sample-rate field is left untouched: speed perturbation
/// reinterprets the same rate, which is what shifts the spectrum.
pub fn resample(clip: &AudioClip, ratio: f64) -> Result<AudioClip, DspError> {
    clip.validate()?;
    if !(MIN_RATIO..=MAX_RATIO).contains(&ratio) || !ratio.is_finite() {
        return Err(DspError::RatioOutOfRange(ratio));
    }

    let x = &clip.samples;
    let n = x.len();
    let out_len = (n as f64 / ratio).round().max(1.0) as usize;

    let cutoff = (1.0 / ratio).min(1.0);
    let half_width = HALF_TAPS / cutoff;
    let i0_beta = bessel_i0(KAISER_BETA);

    let mut out = Vec::with_capacity(out_len);
    for t in 0..out_len {
        let pos = t as f64 * ratio;
        let lo = ((pos - half_width).ceil() as isize).max(0);
        let hi = ((pos + half_width).floor() as isize).min(n as isize - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            let d = j as f64 - pos;
            let u = d / half_width;
            let w = bessel_i0(KAISER_BETA * (1.0 - u * u).max(0.0).sqrt()) / i0_beta;
            acc += x[j as usize] * cutoff * sinc(cutoff * d) * w;
        }
        out.push(acc);
    }

    Ok(AudioClip {
        samples: out,
        sample_rate_hz: clip.sample_rate_hz,
        speaker_id: clip.speaker_id.clone(),
        utterance_id: clip.utterance_id.clone(),
    })
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (series form).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
