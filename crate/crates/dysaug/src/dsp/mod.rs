//! Pure numeric primitives shared by perturbation and feature extraction:
//! FFT, windowing, cross-correlation and band-limited resampling.
//!
//! Everything here is a pure function of its inputs; samples are `f64`
//! internally and converted at the file boundary ([`wav`]).

mod fft;
mod resample;
pub mod wav;

pub use fft::{fft_real, ifft_real};
pub use resample::resample;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("FFT size {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("resampling ratio {0} outside the supported band [0.5, 2.0]")]
    RatioOutOfRange(f64),
    #[error("spectrum length {got} does not match FFT size {fft_size}")]
    SpectrumSizeMismatch { got: usize, fft_size: usize },
}

/// Mono PCM waveform with its sample rate and corpus identity.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub speaker_id: String,
    pub utterance_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
            speaker_id: String::new(),
            utterance_id: String::new(),
        }
    }

    pub fn with_ids(mut self, speaker_id: &str, utterance_id: &str) -> Self {
        self.speaker_id = speaker_id.to_string();
        self.utterance_id = utterance_id.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Rejects empty or non-finite signals; ops that consume clips call this first.
    pub fn validate(&self) -> Result<(), DspError> {
        if self.samples.is_empty() {
            return Err(DspError::EmptyInput("audio clip"));
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFiniteSample(i));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

/// Analysis window; the symmetric Hann form has w(0) = w(L-1) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowFn {
    pub kind: WindowKind,
    pub length: usize,
}

impl WindowFn {
    pub fn hann(length: usize) -> Self {
        Self {
            kind: WindowKind::Hann,
            length,
        }
    }

    pub fn rectangular(length: usize) -> Self {
        Self {
            kind: WindowKind::Rectangular,
            length,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.kind {
            WindowKind::Rectangular => vec![1.0; self.length],
            WindowKind::Hann => {
                if self.length == 1 {
                    return vec![1.0];
                }
                let denom = (self.length - 1) as f64;
                (0..self.length)
                    .map(|r| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * r as f64 / denom).cos()))
                    .collect()
            }
        }
    }
}

/// Best integer lag of `b` against `a` over `[-delta_max, +delta_max]`.
///
/// The score at lag d is `sum_n a[n] * b[n + d]` with out-of-range samples of
/// `b` treated as zero. Ties break toward the smallest |lag| and then toward
/// the negative lag, so an all-zero score landscape yields lag 0.
pub fn cross_correlation(
    a: &[f64],
    b: &[f64],
    delta_max: usize,
) -> Result<(isize, f64), DspError> {
    if a.is_empty() {
        return Err(DspError::EmptyInput("cross-correlation a"));
    }
    if b.is_empty() {
        return Err(DspError::EmptyInput("cross-correlation b"));
    }
    let mut best_lag = 0isize;
    let mut best_score = f64::NEG_INFINITY;
    for lag in lag_search_order(delta_max as isize) {
        let score = lag_score(a, b, lag);
        if score > best_score {
            best_score = score;
            best_lag = lag;
        }
    }
    Ok((best_lag, best_score))
}

/// Lags ordered by the tie-break rule: 0, -1, +1, -2, +2, ...
pub(crate) fn lag_search_order(delta_max: isize) -> impl Iterator<Item = isize> {
    (0..=delta_max).flat_map(|d| {
        let first = std::iter::once(-d);
        let second = if d == 0 { None } else { Some(d) };
        first.chain(second)
    })
}

pub(crate) fn lag_score(a: &[f64], b: &[f64], lag: isize) -> f64 {
    let mut acc = 0.0;
    for (n, &av) in a.iter().enumerate() {
        let j = n as isize + lag;
        if j >= 0 && (j as usize) < b.len() {
            acc += av * b[j as usize];
        }
    }
    acc
}

/// Normalized cross-correlation at zero lag over the common prefix.
///
/// Test-friendly similarity measure in [-1, 1]; 1.0 means identical shape.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let (mut dot, mut ea, mut eb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        dot += a[i] * b[i];
        ea += a[i] * a[i];
        eb += b[i] * b[i];
    }
    if ea == 0.0 || eb == 0.0 {
        return 0.0;
    }
    dot / (ea.sqrt() * eb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(n: usize, period: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / period).sin())
            .collect()
    }

    #[test]
    fn hann_window_endpoints_and_peak() {
        let w = WindowFn::hann(64).values();
        assert_eq!(w[0], 0.0);
        assert_eq!(w[63], 0.0);
        assert!(w.iter().all(|&v| v <= 1.0 + 1e-12));
        assert!(w[32] > 0.99);
    }

    #[test]
    fn self_correlation_peaks_at_zero_lag() {
        let a = sine(256, 32.0);
        let (lag, score) = cross_correlation(&a, &a, 5).unwrap();
        assert_eq!(lag, 0);
        assert!(score > 0.0);
    }

    #[test]
    fn delayed_sine_recovers_the_delay() {
        // b[n] = a[n - 7], exhaustive scan oracle over the full lag range.
        let base = sine(512 + 32, 32.0);
        let a: Vec<f64> = base[32..32 + 256].to_vec();
        let b: Vec<f64> = base[32 - 7..32 - 7 + 256].to_vec();
        let (lag, _) = cross_correlation(&a, &b, 16).unwrap();

        let mut oracle_best = (0isize, f64::NEG_INFINITY);
        for d in -16isize..=16 {
            let s = lag_score(&a, &b, d);
            if s > oracle_best.1 {
                oracle_best = (d, s);
            }
        }
        assert_eq!(lag, 7);
        assert_eq!(lag, oracle_best.0);
    }

    #[test]
    fn all_zero_input_tie_breaks_to_zero_lag() {
        let z = vec![0.0; 64];
        let (lag, score) = cross_correlation(&z, &z, 5).unwrap();
        assert_eq!(lag, 0);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(cross_correlation(&[], &[1.0], 3).is_err());
        assert!(cross_correlation(&[1.0], &[], 3).is_err());
    }

    #[test]
    fn correlation_is_antisymmetric_in_its_arguments() {
        // Unique-maximum landscapes: best lag of (a, b) == -best lag of (b, a).
        let mut rng = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for shift in [0isize, 3, -5, 11] {
            let base: Vec<f64> = (0..300).map(|_| next()).collect();
            let a: Vec<f64> = base[20..260].to_vec();
            let start = (20 - shift) as usize;
            let b: Vec<f64> = base[start..start + 240].to_vec();
            let (lab, _) = cross_correlation(&a, &b, 16).unwrap();
            let (lba, _) = cross_correlation(&b, &a, 16).unwrap();
            assert_eq!(lab, shift);
            assert_eq!(lba, -shift);
        }
    }

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(vec![], 16000).validate().is_err());
        assert!(AudioClip::new(vec![0.1, f64::NAN], 16000).validate().is_err());
        assert!(AudioClip::new(vec![0.1, -0.2], 16000).validate().is_ok());
    }
}
