//! Radix-2 FFT for real frames.
//!
//! Sizes are restricted to powers of two; callers zero-pad up to the next
//! power of two. Forward convention: `X[k] = sum_n x[n] * exp(-2*pi*i*k*n/N)`.

use num_complex::Complex64;

use super::DspError;

/// Forward FFT of a real frame, returning the `N/2 + 1` non-redundant bins.
pub fn fft_real(frame: &[f64]) -> Result<Vec<Complex64>, DspError> {
    let n = frame.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(DspError::NonPowerOfTwo(n));
    }
    let mut buf: Vec<Complex64> = frame.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, false);
    buf.truncate(n / 2 + 1);
    Ok(buf)
}

/// Inverse of [`fft_real`]: reconstructs the length-`n` real frame from its
/// half spectrum by conjugate-symmetric extension.
pub fn ifft_real(spectrum: &[Complex64], n: usize) -> Result<Vec<f64>, DspError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(DspError::NonPowerOfTwo(n));
    }
    if spectrum.len() != n / 2 + 1 {
        return Err(DspError::SpectrumSizeMismatch {
            got: spectrum.len(),
            fft_size: n,
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..spectrum.len()].copy_from_slice(spectrum);
    for k in 1..n / 2 {
        buf[n - k] = spectrum[k].conj();
    }
    fft_in_place(&mut buf, true);
    let scale = 1.0 / n as f64;
    Ok(buf.into_iter().map(|c| c.re * scale).collect())
}

/// Iterative Cooley-Tukey, decimation in time. `buf.len()` must be a power of two.
fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[i + k];
                let v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w *= wlen;
            }
            i += len;
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(N^2) direct DFT, the independent oracle for the fast path.
    fn direct_dft(frame: &[f64]) -> Vec<Complex64> {
        let n = frame.len();
        (0..n / 2 + 1)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &x) in frame.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    acc += Complex64::new(ang.cos(), ang.sin()) * x;
                }
                acc
            })
            .collect()
    }

    fn lcg_frame(n: usize, mut state: u64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut frame = vec![0.0; 8];
        frame[0] = 1.0;
        let spec = fft_real(&frame).unwrap();
        assert_eq!(spec.len(), 5);
        for bin in spec {
            assert!((bin.re - 1.0).abs() < 1e-12);
            assert!(bin.im.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let spec = fft_real(&[1.0; 8]).unwrap();
        assert!((spec[0].re - 8.0).abs() < 1e-12);
        assert!(spec[0].im.abs() < 1e-12);
        for bin in &spec[1..] {
            assert!(bin.norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft_on_random_frames() {
        for seed in [1u64, 7, 42] {
            let frame = lcg_frame(64, seed);
            let fast = fft_real(&frame).unwrap();
            let slow = direct_dft(&frame);
            for (f, s) in fast.iter().zip(&slow) {
                let denom = s.norm().max(1.0);
                assert!((f - s).norm() / denom < 1e-9, "fast={f} slow={s}");
            }
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(matches!(fft_real(&[0.0; 12]), Err(DspError::NonPowerOfTwo(12))));
        assert!(fft_real(&[]).is_err());
    }

    #[test]
    fn round_trip_recovers_frame() {
        for n in [8usize, 64, 256] {
            let frame = lcg_frame(n, n as u64);
            let spec = fft_real(&frame).unwrap();
            let back = ifft_real(&spec, n).unwrap();
            let max_err = frame
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_err < 1e-9, "n={n} max_err={max_err}");
        }
    }
}
