//! 2-D cross-correlation convolution with exact adjoints.
//!
//! Replicate padding copies edge values so stride-1 convolution preserves
//! spatial size; its adjoint accumulates edge gradients back onto the
//! boundary cells. `Padding::None` gives the usual floor((in - k)/s) + 1
//! output size.

use super::{NeuralError, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Same-size output; requires stride (1,1) and odd kernel dims.
    Replicate,
    None,
}

#[derive(Debug, Clone)]
pub struct Conv2dLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: Padding,
    /// `[out_ch][in_ch][kh][kw]`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of one convolution layer application.
pub struct ConvGrads {
    pub grad_x: Tensor4,
    pub grad_w: Vec<f64>,
    pub grad_b: Vec<f64>,
}

impl Conv2dLayer {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self, NeuralError> {
        if in_ch == 0 || out_ch == 0 || kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0
        {
            return Err(NeuralError::BadLayerConfig(
                "channels, kernel and stride must be positive".into(),
            ));
        }
        if padding == Padding::Replicate {
            if stride != (1, 1) {
                return Err(NeuralError::BadLayerConfig(format!(
                    "replicate padding requires stride (1,1), got {stride:?}"
                )));
            }
            if kernel.0 % 2 == 0 || kernel.1 % 2 == 0 {
                return Err(NeuralError::BadLayerConfig(format!(
                    "replicate padding requires odd kernel dims for same-size output, got {kernel:?}"
                )));
            }
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            weights: vec![0.0; out_ch * in_ch * kernel.0 * kernel.1],
            bias: vec![0.0; out_ch],
        })
    }

    pub fn weight_count(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    fn w_index(&self, oc: usize, ic: usize, kh: usize, kw: usize) -> usize {
        ((oc * self.in_ch + ic) * self.kernel.0 + kh) * self.kernel.1 + kw
    }

    fn pad_amounts(&self) -> (usize, usize) {
        match self.padding {
            Padding::Replicate => ((self.kernel.0 - 1) / 2, (self.kernel.1 - 1) / 2),
            Padding::None => (0, 0),
        }
    }

    /// Output spatial size for an input of `(h, w)`.
    pub fn output_spatial(&self, h: usize, w: usize) -> Result<(usize, usize), NeuralError> {
        match self.padding {
            Padding::Replicate => {
                if h == 0 || w == 0 {
                    return Err(NeuralError::UndersizedInput {
                        input: (h, w),
                        kernel: self.kernel,
                    });
                }
                Ok((h, w))
            }
            Padding::None => {
                if h < self.kernel.0 || w < self.kernel.1 {
                    return Err(NeuralError::UndersizedInput {
                        input: (h, w),
                        kernel: self.kernel,
                    });
                }
                Ok((
                    (h - self.kernel.0) / self.stride.0 + 1,
                    (w - self.kernel.1) / self.stride.1 + 1,
                ))
            }
        }
    }

    fn check_input(&self, x: &Tensor4) -> Result<(usize, usize), NeuralError> {
        if x.shape[1] != self.in_ch {
            return Err(NeuralError::ChannelMismatch {
                input: x.shape[1],
                layer: self.in_ch,
            });
        }
        self.output_spatial(x.shape[2], x.shape[3])
    }

    /// Replicate-pads all planes of `x` by the layer's pad amounts.
    fn pad_input(&self, x: &Tensor4) -> Tensor4 {
        let (ph, pw) = self.pad_amounts();
        if ph == 0 && pw == 0 {
            return x.clone();
        }
        let [b_n, c_n, h, w] = x.shape;
        let (hp, wp) = (h + 2 * ph, w + 2 * pw);
        let mut out = Tensor4::zeros([b_n, c_n, hp, wp]);
        for b in 0..b_n {
            for c in 0..c_n {
                for i in 0..hp {
                    let src_h = i.saturating_sub(ph).min(h - 1);
                    let src_base = x.index(b, c, src_h, 0);
                    let dst_base = out.index(b, c, i, 0);
                    for j in 0..wp {
                        let src_w = j.saturating_sub(pw).min(w - 1);
                        out.data[dst_base + j] = x.data[src_base + src_w];
                    }
                }
            }
        }
        out
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4, NeuralError> {
        let (h_out, w_out) = self.check_input(x)?;
        let xp = self.pad_input(x);
        let [b_n, _, hp, wp] = xp.shape;
        let (kh_n, kw_n) = self.kernel;
        let (sh, sw) = self.stride;

        let mut out = Tensor4::zeros([b_n, self.out_ch, h_out, w_out]);
        for b in 0..b_n {
            for oc in 0..self.out_ch {
                let out_base = out.index(b, oc, 0, 0);
                out.data[out_base..out_base + h_out * w_out].fill(self.bias[oc]);
                for ic in 0..self.in_ch {
                    let xp_base = ((b * self.in_ch + ic) * hp) * wp;
                    for kh in 0..kh_n {
                        for kw in 0..kw_n {
                            let wv = self.weights[self.w_index(oc, ic, kh, kw)];
                            for oh in 0..h_out {
                                let src = xp_base + (oh * sh + kh) * wp + kw;
                                let dst = out_base + oh * w_out;
                                if sw == 1 {
                                    let src_row = &xp.data[src..src + w_out];
                                    let dst_row = &mut out.data[dst..dst + w_out];
                                    for (d, s) in dst_row.iter_mut().zip(src_row) {
                                        *d += wv * s;
                                    }
                                } else {
                                    for ow in 0..w_out {
                                        out.data[dst + ow] += wv * xp.data[src + ow * sw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact gradients of [`Self::forward`] given the upstream gradient.
    pub fn backward(&self, x: &Tensor4, upstream: &Tensor4) -> Result<ConvGrads, NeuralError> {
        let (h_out, w_out) = self.check_input(x)?;
        let expected = [x.shape[0], self.out_ch, h_out, w_out];
        if upstream.shape != expected {
            return Err(NeuralError::ShapeMismatch {
                context: "conv2d upstream gradient",
                expected: format!("{expected:?}"),
                got: upstream.shape_string(),
            });
        }
        let xp = self.pad_input(x);
        let [b_n, _, hp, wp] = xp.shape;
        let (kh_n, kw_n) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.pad_amounts();

        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.bias.len()];
        let mut grad_xp = Tensor4::zeros(xp.shape);

        for b in 0..b_n {
            for oc in 0..self.out_ch {
                let up_base = upstream.index(b, oc, 0, 0);
                let up_plane = &upstream.data[up_base..up_base + h_out * w_out];
                grad_b[oc] += up_plane.iter().sum::<f64>();
                for ic in 0..self.in_ch {
                    let xp_base = ((b * self.in_ch + ic) * hp) * wp;
                    for kh in 0..kh_n {
                        for kw in 0..kw_n {
                            let widx = self.w_index(oc, ic, kh, kw);
                            let wv = self.weights[widx];
                            let mut gw = 0.0;
                            for oh in 0..h_out {
                                let src = xp_base + (oh * sh + kh) * wp + kw;
                                let urow = &up_plane[oh * w_out..(oh + 1) * w_out];
                                if sw == 1 {
                                    let xrow = &xp.data[src..src + w_out];
                                    let grow = &mut grad_xp.data[src..src + w_out];
                                    for ((u, xv), g) in urow.iter().zip(xrow).zip(grow) {
                                        gw += u * xv;
                                        *g += wv * u;
                                    }
                                } else {
                                    for (ow, u) in urow.iter().enumerate() {
                                        gw += u * xp.data[src + ow * sw];
                                        grad_xp.data[src + ow * sw] += wv * u;
                                    }
                                }
                            }
                            grad_w[widx] += gw;
                        }
                    }
                }
            }
        }

        // Fold padded-cell gradients back onto their source cells.
        let grad_x = if ph == 0 && pw == 0 {
            grad_xp
        } else {
            let [_, c_n, h, w] = x.shape;
            let mut grad_x = Tensor4::zeros(x.shape);
            for b in 0..b_n {
                for c in 0..c_n {
                    for i in 0..hp {
                        let src_h = i.saturating_sub(ph).min(h - 1);
                        for j in 0..wp {
                            let src_w = j.saturating_sub(pw).min(w - 1);
                            let gi = grad_x.index(b, c, src_h, src_w);
                            grad_x.data[gi] += grad_xp.at(b, c, i, j);
                        }
                    }
                }
            }
            grad_x
        };

        Ok(ConvGrads {
            grad_x,
            grad_w,
            grad_b,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.max(1);
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor4 {
        let mut next = lcg(seed);
        let n = shape.iter().product();
        Tensor4::from_vec(shape, (0..n).map(|_| next()).collect()).unwrap()
    }

    #[test]
    fn one_by_one_identity_kernel() {
        let mut layer = Conv2dLayer::new(1, 1, (1, 1), (1, 1), Padding::None).unwrap();
        layer.weights[0] = 1.0;
        let x = random_tensor([1, 1, 5, 7], 3);
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape, x.shape);
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn discriminator_chain_spatial_sizes() {
        // Four 2x2/stride-2 layers: 40 -> 20 -> 10 -> 5 -> 2, 64 -> ... -> 4.
        let layer = Conv2dLayer::new(1, 1, (2, 2), (2, 2), Padding::None).unwrap();
        let mut dims = (40usize, 64usize);
        let expect = [(20, 32), (10, 16), (5, 8), (2, 4)];
        for e in expect {
            dims = layer.output_spatial(dims.0, dims.1).unwrap();
            assert_eq!(dims, e);
        }
    }

    #[test]
    fn all_ones_kernel_on_constant_input_with_replicate_padding() {
        let mut layer = Conv2dLayer::new(1, 1, (3, 3), (1, 1), Padding::Replicate).unwrap();
        layer.weights.fill(1.0);
        layer.bias[0] = 0.25;
        let x = Tensor4::from_vec([1, 1, 6, 9], vec![1.0; 54]).unwrap();
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape, [1, 1, 6, 9]);
        for v in &y.data {
            assert!((v - 9.25).abs() < 1e-12);
        }
    }

    #[test]
    fn replicate_padding_preserves_any_spatial_size() {
        let layer = Conv2dLayer::new(1, 2, (3, 3), (1, 1), Padding::Replicate).unwrap();
        for (h, w) in [(1, 1), (1, 7), (40, 1), (3, 501)] {
            let x = random_tensor([1, 1, h, w], (h * 1000 + w) as u64);
            let y = layer.forward(&x).unwrap();
            assert_eq!(y.shape, [1, 2, h, w]);
        }
    }

    #[test]
    fn channel_mismatch_and_undersized_inputs_rejected() {
        let layer = Conv2dLayer::new(2, 1, (3, 3), (1, 1), Padding::None).unwrap();
        let wrong_ch = random_tensor([1, 3, 8, 8], 1);
        assert!(matches!(
            layer.forward(&wrong_ch),
            Err(NeuralError::ChannelMismatch { input: 3, layer: 2 })
        ));
        let small = random_tensor([1, 2, 2, 8], 2);
        assert!(matches!(
            layer.forward(&small),
            Err(NeuralError::UndersizedInput { .. })
        ));
    }

    #[test]
    fn replicate_config_validation() {
        assert!(Conv2dLayer::new(1, 1, (3, 3), (2, 2), Padding::Replicate).is_err());
        assert!(Conv2dLayer::new(1, 1, (2, 2), (1, 1), Padding::Replicate).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut layer = Conv2dLayer::new(2, 3, (3, 3), (1, 1), Padding::Replicate).unwrap();
        let mut next = lcg(9);
        for w in layer.weights.iter_mut() {
            *w = next();
        }
        let x = random_tensor([2, 2, 6, 6], 10);
        let up = Tensor4::zeros([2, 3, 6, 6]);
        let grads = layer.backward(&x, &up).unwrap();
        assert!(grads.grad_x.data.iter().all(|&g| g == 0.0));
        assert!(grads.grad_w.iter().all(|&g| g == 0.0));
        assert!(grads.grad_b.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn replicate_adjoint_conserves_gradient_mass() {
        // Backward through replicate padding only redistributes: the summed
        // input gradient equals the summed gradient of an explicitly padded
        // no-padding convolution.
        let mut layer = Conv2dLayer::new(1, 2, (3, 3), (1, 1), Padding::Replicate).unwrap();
        let mut next = lcg(77);
        for w in layer.weights.iter_mut() {
            *w = next();
        }
        let x = random_tensor([1, 1, 5, 6], 78);
        let up = random_tensor([1, 2, 5, 6], 79);
        let grads = layer.backward(&x, &up).unwrap();

        // Oracle route: explicit replicate-padded input + None-padding conv.
        let mut explicit = Conv2dLayer::new(1, 2, (3, 3), (1, 1), Padding::None).unwrap();
        explicit.weights.copy_from_slice(&layer.weights);
        let xp = layer.pad_input(&x);
        let grads_padded = explicit.backward(&xp, &up).unwrap();

        let sum_fold: f64 = grads.grad_x.data.iter().sum();
        let sum_pad: f64 = grads_padded.grad_x.data.iter().sum();
        assert!((sum_fold - sum_pad).abs() < 1e-10, "{sum_fold} vs {sum_pad}");
        // Forward routes agree too.
        let y1 = layer.forward(&x).unwrap();
        let y2 = explicit.forward(&xp).unwrap();
        assert_eq!(y1.shape, y2.shape);
        for (a, b) in y1.data.iter().zip(&y2.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
