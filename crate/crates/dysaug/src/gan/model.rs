//! Generator and discriminator architectures.
//!
//! Generator: 4 convolutional layers with channels 1-8-8-8-1, all 3x3 kernels
//! at stride 1x1 with replicate padding, ReLU after the first three, linear
//! output. Shape-preserving for any input length.
//!
//! Discriminator: 4 convolutional layers of 8, 16, 32 and 64 kernels, all 2x2
//! at stride 2x2 without padding, ReLU after each, then flatten and a
//! fully-connected layer with sigmoid for binary classification.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::neural::{
    relu_backward, relu_forward, sigmoid_backward, sigmoid_forward, Conv2dLayer, FcLayer,
    NeuralError, Padding, Tensor4,
};

use super::GanError;

pub const FREQ_BINS: usize = 40;
const WEIGHT_INIT_STD: f64 = 0.02;

pub const GEN_CHANNELS: [usize; 5] = [1, 8, 8, 8, 1];
pub const DISC_CHANNELS: [usize; 5] = [1, 8, 16, 32, 64];

fn init_weights(layer_weights: &mut [f64], rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, WEIGHT_INIT_STD).unwrap();
    for w in layer_weights.iter_mut() {
        *w = normal.sample(rng);
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorNet {
    pub layers: Vec<Conv2dLayer>,
}

/// Intermediate activations of one generator forward pass.
pub struct GenCache {
    input: Tensor4,
    pre: Vec<Tensor4>,
    act: Vec<Tensor4>,
}

/// Per-layer (weight, bias) gradients in declaration order.
pub struct GenGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
    pub grad_input: Tensor4,
}

impl GeneratorNet {
    /// Zero-weight network; see [`Self::init`] for the trained starting point.
    pub fn new() -> Self {
        let layers = (0..4)
            .map(|i| {
                Conv2dLayer::new(
                    GEN_CHANNELS[i],
                    GEN_CHANNELS[i + 1],
                    (3, 3),
                    (1, 1),
                    Padding::Replicate,
                )
                .expect("generator layer config is static")
            })
            .collect();
        Self { layers }
    }

    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let mut net = Self::new();
        for layer in net.layers.iter_mut() {
            init_weights(&mut layer.weights, rng);
        }
        net
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4, NeuralError> {
        let mut h = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            h = layer.forward(&relu_forward(&h))?;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: &Tensor4) -> Result<(Tensor4, GenCache), NeuralError> {
        let mut pre = Vec::with_capacity(3);
        let mut act = Vec::with_capacity(3);
        let mut h = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            let a = relu_forward(&h);
            pre.push(h);
            let next = layer.forward(&a)?;
            act.push(a);
            h = next;
        }
        Ok((
            h.clone(),
            GenCache {
                input: x.clone(),
                pre,
                act,
            },
        ))
    }

    pub fn backward(&self, cache: &GenCache, upstream: &Tensor4) -> Result<GenGrads, NeuralError> {
        let mut grads = vec![(Vec::new(), Vec::new()); 4];
        let mut up = upstream.clone();
        for i in (1..4).rev() {
            let g = self.layers[i].backward(&cache.act[i - 1], &up)?;
            grads[i] = (g.grad_w, g.grad_b);
            up = relu_backward(&cache.pre[i - 1], &g.grad_x)?;
        }
        let g = self.layers[0].backward(&cache.input, &up)?;
        grads[0] = (g.grad_w, g.grad_b);
        Ok(GenGrads {
            layers: grads,
            grad_input: g.grad_x,
        })
    }
}

impl Default for GeneratorNet {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct DiscriminatorNet {
    pub convs: Vec<Conv2dLayer>,
    pub fc: FcLayer,
    pub freq_bins: usize,
    pub crop_frames: usize,
    /// Spatial size after each conv stage, for shape validation.
    pub stage_dims: Vec<(usize, usize)>,
}

pub struct DiscCache {
    input: Tensor4,
    pre: Vec<Tensor4>,
    act: Vec<Tensor4>,
    flat: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

pub struct DiscGrads {
    pub convs: Vec<(Vec<f64>, Vec<f64>)>,
    pub fc: (Vec<f64>, Vec<f64>),
    pub grad_input: Tensor4,
}

impl DiscGrads {
    pub fn zeros(net: &DiscriminatorNet, input_shape: [usize; 4]) -> Self {
        Self {
            convs: net
                .convs
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
            fc: (
                vec![0.0; net.fc.weights.len()],
                vec![0.0; net.fc.bias.len()],
            ),
            grad_input: Tensor4::zeros(input_shape),
        }
    }

    pub fn accumulate(&mut self, other: &DiscGrads) {
        for (dst, src) in self.convs.iter_mut().zip(&other.convs) {
            for (d, s) in dst.0.iter_mut().zip(&src.0) {
                *d += s;
            }
            for (d, s) in dst.1.iter_mut().zip(&src.1) {
                *d += s;
            }
        }
        for (d, s) in self.fc.0.iter_mut().zip(&other.fc.0) {
            *d += s;
        }
        for (d, s) in self.fc.1.iter_mut().zip(&other.fc.1) {
            *d += s;
        }
    }
}

impl DiscriminatorNet {
    /// Builds the net for a fixed input crop of `freq_bins` x `crop_frames`.
    pub fn new(freq_bins: usize, crop_frames: usize) -> Result<Self, GanError> {
        let mut convs = Vec::with_capacity(4);
        for i in 0..4 {
            convs.push(Conv2dLayer::new(
                DISC_CHANNELS[i],
                DISC_CHANNELS[i + 1],
                (2, 2),
                (2, 2),
                Padding::None,
            )?);
        }
        let mut dims = (freq_bins, crop_frames);
        let mut stage_dims = Vec::with_capacity(4);
        for layer in &convs {
            dims = layer.output_spatial(dims.0, dims.1).map_err(|_| {
                GanError::BadConfig(format!(
                    "crop {freq_bins}x{crop_frames} collapses below the 2x2 kernel in the conv chain"
                ))
            })?;
            stage_dims.push(dims);
        }
        let flat_len = DISC_CHANNELS[4] * dims.0 * dims.1;
        Ok(Self {
            convs,
            fc: FcLayer::new(flat_len, 1),
            freq_bins,
            crop_frames,
            stage_dims,
        })
    }

    pub fn init(freq_bins: usize, crop_frames: usize, rng: &mut ChaCha8Rng) -> Result<Self, GanError> {
        let mut net = Self::new(freq_bins, crop_frames)?;
        for layer in net.convs.iter_mut() {
            init_weights(&mut layer.weights, rng);
        }
        init_weights(&mut net.fc.weights, rng);
        Ok(net)
    }

    /// Flattened conv-stack output length consumed by the fc layer.
    pub fn flat_len(&self) -> usize {
        self.fc.in_dim
    }

    fn check_input(&self, x: &Tensor4) -> Result<(), NeuralError> {
        let expected = [x.shape[0], 1, self.freq_bins, self.crop_frames];
        if x.shape != expected {
            return Err(NeuralError::ShapeMismatch {
                context: "discriminator input",
                expected: format!("{expected:?}"),
                got: x.shape_string(),
            });
        }
        Ok(())
    }

    /// Per-item probabilities for a batch crop tensor.
    pub fn forward(&self, x: &Tensor4) -> Result<Vec<f64>, NeuralError> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Tensor4) -> Result<(Vec<f64>, DiscCache), NeuralError> {
        self.check_input(x)?;
        let batch = x.shape[0];
        let mut pre = Vec::with_capacity(4);
        let mut act = Vec::with_capacity(4);
        let mut h = x.clone();
        for layer in &self.convs {
            let p = layer.forward(&h)?;
            let a = relu_forward(&p);
            pre.push(p);
            h = a.clone();
            act.push(a);
        }
        let per_item = h.numel() / batch;
        let mut flat = Vec::with_capacity(batch);
        let mut logits = Vec::with_capacity(batch);
        for b in 0..batch {
            let item = h.data[b * per_item..(b + 1) * per_item].to_vec();
            let z = self.fc.forward(&item)?;
            logits.push(z[0]);
            flat.push(item);
        }
        let probs = sigmoid_forward(&logits);
        Ok((
            probs.clone(),
            DiscCache {
                input: x.clone(),
                pre,
                act,
                flat,
                probs,
            },
        ))
    }

    /// Backward from d(loss)/d(probability) per batch item.
    pub fn backward(&self, cache: &DiscCache, grad_probs: &[f64]) -> Result<DiscGrads, NeuralError> {
        let batch = cache.input.shape[0];
        if grad_probs.len() != batch {
            return Err(NeuralError::ShapeMismatch {
                context: "discriminator probability gradient",
                expected: batch.to_string(),
                got: grad_probs.len().to_string(),
            });
        }
        let grad_logits = sigmoid_backward(&cache.probs, grad_probs);

        let mut grads = DiscGrads::zeros(self, cache.input.shape);
        let last_act = cache.act.last().expect("four conv stages");
        let per_item = last_act.numel() / batch;
        let mut grad_flat = Tensor4::zeros(last_act.shape);
        for b in 0..batch {
            let fc_grads = self.fc.backward(&cache.flat[b], &[grad_logits[b]])?;
            for (d, s) in grads.fc.0.iter_mut().zip(&fc_grads.grad_w) {
                *d += s;
            }
            grads.fc.1[0] += fc_grads.grad_b[0];
            grad_flat.data[b * per_item..(b + 1) * per_item].copy_from_slice(&fc_grads.grad_x);
        }

        let mut up = grad_flat;
        for i in (0..4).rev() {
            let up_pre = relu_backward(&cache.pre[i], &up)?;
            let below = if i == 0 { &cache.input } else { &cache.act[i - 1] };
            let g = self.convs[i].backward(below, &up_pre)?;
            grads.convs[i] = (g.grad_w, g.grad_b);
            up = g.grad_x;
        }
        grads.grad_input = up;
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn generator_preserves_shape_for_all_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = GeneratorNet::init(&mut rng);
        for t in [1usize, 7, 64, 501] {
            let x = Tensor4::zeros([1, 1, FREQ_BINS, t]);
            let y = net.forward(&x).unwrap();
            assert_eq!(y.shape, [1, 1, FREQ_BINS, t]);
        }
    }

    #[test]
    fn zero_weight_generator_maps_everything_to_zero() {
        let net = GeneratorNet::new();
        let x = Tensor4::from_vec([1, 1, FREQ_BINS, 5], vec![1.25; FREQ_BINS * 5]).unwrap();
        let y = net.forward(&x).unwrap();
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generator_channel_progression() {
        let net = GeneratorNet::new();
        let chans: Vec<(usize, usize)> = net.layers.iter().map(|l| (l.in_ch, l.out_ch)).collect();
        assert_eq!(chans, vec![(1, 8), (8, 8), (8, 8), (8, 1)]);
        for l in &net.layers {
            assert_eq!(l.kernel, (3, 3));
            assert_eq!(l.stride, (1, 1));
            assert_eq!(l.padding, Padding::Replicate);
        }
    }

    #[test]
    fn discriminator_chain_and_flatten_length_at_crop_64() {
        let net = DiscriminatorNet::new(FREQ_BINS, 64).unwrap();
        let chans: Vec<(usize, usize)> = net.convs.iter().map(|l| (l.in_ch, l.out_ch)).collect();
        assert_eq!(chans, vec![(1, 8), (8, 16), (16, 32), (32, 64)]);
        for l in &net.convs {
            assert_eq!(l.kernel, (2, 2));
            assert_eq!(l.stride, (2, 2));
        }
        assert_eq!(net.stage_dims, vec![(20, 32), (10, 16), (5, 8), (2, 4)]);
        assert_eq!(net.flat_len(), 64 * 2 * 4);
        assert_eq!(net.flat_len(), 512);
    }

    #[test]
    fn fresh_discriminator_outputs_are_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = DiscriminatorNet::init(FREQ_BINS, 64, &mut rng).unwrap();
        let mut x = Tensor4::zeros([3, 1, FREQ_BINS, 64]);
        for (i, v) in x.data.iter_mut().enumerate() {
            *v = ((i as f64) * 0.37).sin();
        }
        let probs = net.forward(&x).unwrap();
        assert_eq!(probs.len(), 3);
        for p in probs {
            assert!(p > 0.0 && p < 1.0, "p={p}");
        }
    }

    #[test]
    fn discriminator_rejects_wrong_crop_shape() {
        let net = DiscriminatorNet::new(FREQ_BINS, 64).unwrap();
        let x = Tensor4::zeros([1, 1, FREQ_BINS, 63]);
        assert!(net.forward(&x).is_err());
    }

    #[test]
    fn generator_loss_gradient_matches_finite_differences_through_discriminator() {
        // End-to-end: d loss_G / d (generator output) via the discriminator.
        use crate::neural::{
            central_difference, generator_loss, generator_loss_grad, max_rel_error,
            GeneratorLossKind,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DiscriminatorNet::init(16, 16, &mut rng).unwrap();
        let n = 16 * 16;
        let fake: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fake_t = Tensor4::from_vec([1, 1, 16, 16], fake.clone()).unwrap();

        let (probs, cache) = net.forward_cached(&fake_t).unwrap();
        let gp = generator_loss_grad(&probs, GeneratorLossKind::NonSaturating);
        let grads = net.backward(&cache, &gp).unwrap();

        let mut f = |data: &[f64]| {
            let x = Tensor4::from_vec([1, 1, 16, 16], data.to_vec()).unwrap();
            let (p, _) = net.forward_cached(&x).unwrap();
            generator_loss(&p, GeneratorLossKind::NonSaturating).unwrap()
        };
        let num = central_difference(&mut f, &fake, 1e-5);
        let err = max_rel_error(&grads.grad_input.data, &num);
        assert!(err < 1e-4, "max rel error {err}");
    }
}
