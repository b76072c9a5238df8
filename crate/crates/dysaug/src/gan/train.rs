//! Adversarial training loop: one discriminator step then one generator step
//! per iteration, with the learning rate halved every 2500 iterations for
//! both networks. Fully deterministic given the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::FbankMatrix;
use crate::neural::{
    adam_step, bce_losses, discriminator_loss_grads, generator_loss, generator_loss_grad,
    AdamState, GeneratorLossKind, Tensor4,
};

use super::checkpoint::FORMAT_VERSION;
use super::model::{DiscriminatorNet, GeneratorNet, FREQ_BINS};
use super::{GanCheckpoint, GanError, TrainingPair};

pub const LR_HALVING_INTERVAL: u64 = 2500;

/// `initial_lr * 0.5^floor(iteration / 2500)`.
pub fn lr_schedule(initial_lr: f64, iteration: u64) -> f64 {
    initial_lr * 0.5f64.powi((iteration / LR_HALVING_INTERVAL) as i32)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub total_iters: u64,
    pub batch_size: usize,
    pub crop_frames: usize,
    pub seed: u64,
    pub generator_loss: GeneratorLossKind,
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 2e-4,
            total_iters: 10_000,
            batch_size: 8,
            crop_frames: 64,
            seed: 17,
            generator_loss: GeneratorLossKind::default(),
            log_every: 100,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MetricsRow {
    pub iteration: u64,
    pub loss_d: f64,
    pub loss_g: f64,
    /// Mean Frobenius distance between G(control) and target on the
    /// held-out pair subset (full-length, normalized domain).
    pub holdout_l2: f64,
}

pub struct TrainOutcome {
    pub checkpoint: GanCheckpoint,
    pub metrics: Vec<MetricsRow>,
    /// Indices into the input pair list that were held out of training.
    pub holdout_indices: Vec<usize>,
}

/// Every fifth pair is held out for the running distance metric; training
/// uses the remainder (all pairs when fewer than five exist).
pub fn holdout_split(n_pairs: usize) -> (Vec<usize>, Vec<usize>) {
    if n_pairs < 5 {
        return ((0..n_pairs).collect(), Vec::new());
    }
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for i in 0..n_pairs {
        if i % 5 == 4 {
            holdout.push(i);
        } else {
            train.push(i);
        }
    }
    (train, holdout)
}

/// Reflected index for crops longer than the matrix (period `2T - 2`).
fn reflect_index(i: usize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1);
    let m = i % period;
    if m < len {
        m
    } else {
        period - m
    }
}

/// Copies a `crop` frame window starting at `start` into one batch item,
/// transposed to channel x freq x time, reflecting past the end.
fn fill_crop(dst: &mut Tensor4, item: usize, mat: &FbankMatrix, start: usize, crop: usize) {
    for dt in 0..crop {
        let src_t = reflect_index(start + dt, mat.n_frames);
        let row = mat.row(src_t);
        for (f, &v) in row.iter().enumerate() {
            let idx = dst.index(item, 0, f, dt);
            dst.data[idx] = v;
        }
    }
}

fn matrix_to_tensor(mat: &FbankMatrix) -> Tensor4 {
    let mut t = Tensor4::zeros([1, 1, mat.n_bins, mat.n_frames]);
    for ft in 0..mat.n_frames {
        for (f, &v) in mat.row(ft).iter().enumerate() {
            let idx = t.index(0, 0, f, ft);
            t.data[idx] = v;
        }
    }
    t
}

/// Mean Frobenius distance between generator outputs and targets over pairs.
pub fn mean_pair_distance(
    gen: &GeneratorNet,
    pairs: &[&TrainingPair],
) -> Result<f64, GanError> {
    if pairs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for pair in pairs {
        let x = matrix_to_tensor(&pair.control_fbank);
        let y = gen.forward(&x)?;
        let t = matrix_to_tensor(&pair.target_fbank);
        let dist: f64 = y
            .data
            .iter()
            .zip(&t.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        total += dist;
    }
    Ok(total / pairs.len() as f64)
}

struct ParamSet<'a> {
    blocks: Vec<(&'static str, &'a mut Vec<f64>)>,
}

fn gen_param_blocks(net: &mut GeneratorNet) -> ParamSet<'_> {
    const NAMES: [&str; 8] = [
        "gen.conv1.weight",
        "gen.conv1.bias",
        "gen.conv2.weight",
        "gen.conv2.bias",
        "gen.conv3.weight",
        "gen.conv3.bias",
        "gen.conv4.weight",
        "gen.conv4.bias",
    ];
    let mut blocks = Vec::with_capacity(8);
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let (w_name, b_name) = (NAMES[i * 2], NAMES[i * 2 + 1]);
        blocks.push((w_name, &mut layer.weights));
        blocks.push((b_name, &mut layer.bias));
    }
    ParamSet { blocks }
}

fn disc_param_blocks(net: &mut DiscriminatorNet) -> ParamSet<'_> {
    const NAMES: [&str; 8] = [
        "disc.conv1.weight",
        "disc.conv1.bias",
        "disc.conv2.weight",
        "disc.conv2.bias",
        "disc.conv3.weight",
        "disc.conv3.bias",
        "disc.conv4.weight",
        "disc.conv4.bias",
    ];
    let mut blocks = Vec::with_capacity(10);
    for (i, layer) in net.convs.iter_mut().enumerate() {
        blocks.push((NAMES[i * 2], &mut layer.weights));
        blocks.push((NAMES[i * 2 + 1], &mut layer.bias));
    }
    blocks.push(("disc.fc.weight", &mut net.fc.weights));
    blocks.push(("disc.fc.bias", &mut net.fc.bias));
    ParamSet { blocks }
}

fn apply_updates(
    params: ParamSet<'_>,
    grads: &[(&Vec<f64>, &Vec<f64>)],
    states: &mut [AdamState],
    lr: f64,
) -> Result<(), GanError> {
    let mut flat: Vec<&Vec<f64>> = Vec::with_capacity(grads.len() * 2);
    for (w, b) in grads {
        flat.push(w);
        flat.push(b);
    }
    for ((name, block), (grad, state)) in params
        .blocks
        .into_iter()
        .zip(flat.iter().zip(states.iter_mut()))
    {
        state.lr = lr;
        adam_step(name, block, grad, state)?;
    }
    Ok(())
}

/// Trains one speaker GAN over the given pairs.
pub fn train_speaker_gan(
    pairs: &[TrainingPair],
    config: &TrainConfig,
) -> Result<TrainOutcome, GanError> {
    if pairs.is_empty() {
        return Err(GanError::NoPairs {
            unmatched_words: 0,
            skipped_pairs: 0,
        });
    }
    if config.batch_size == 0 || config.total_iters == 0 {
        return Err(GanError::BadConfig(
            "batch size and iteration count must be positive".into(),
        ));
    }
    let target_speaker = pairs[0].target_fbank.speaker_id.clone();
    for p in pairs {
        if p.target_fbank.speaker_id != target_speaker {
            return Err(GanError::MixedTargetSpeakers {
                first: target_speaker,
                other: p.target_fbank.speaker_id.clone(),
            });
        }
        if p.control_fbank.n_bins != FREQ_BINS || p.target_fbank.n_bins != FREQ_BINS {
            return Err(GanError::BadFeatureDim(p.control_fbank.n_bins));
        }
        if p.control_fbank.n_frames != p.target_fbank.n_frames {
            return Err(GanError::BadConfig(format!(
                "pair for word {:?} is not duration-matched: {} vs {} frames",
                p.word_id, p.control_fbank.n_frames, p.target_fbank.n_frames
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut gen = GeneratorNet::init(&mut rng);
    let mut disc = DiscriminatorNet::init(FREQ_BINS, config.crop_frames, &mut rng)?;

    let (train_idx, holdout_idx) = holdout_split(pairs.len());
    let train_pairs: Vec<&TrainingPair> = train_idx.iter().map(|&i| &pairs[i]).collect();
    let metric_pairs: Vec<&TrainingPair> = if holdout_idx.is_empty() {
        train_pairs.clone()
    } else {
        holdout_idx.iter().map(|&i| &pairs[i]).collect()
    };

    let mut adam_gen: Vec<AdamState> = {
        let blocks = gen_param_blocks(&mut gen);
        blocks
            .blocks
            .iter()
            .map(|(_, b)| AdamState::new(b.len(), config.initial_lr))
            .collect()
    };
    let mut adam_disc: Vec<AdamState> = {
        let blocks = disc_param_blocks(&mut disc);
        blocks
            .blocks
            .iter()
            .map(|(_, b)| AdamState::new(b.len(), config.initial_lr))
            .collect()
    };

    let crop = config.crop_frames;
    let batch = config.batch_size;
    let mut metrics = Vec::new();
    let mut lr = config.initial_lr;

    let snapshot = |gen: &GeneratorNet,
                    disc: &DiscriminatorNet,
                    adam_gen: &[AdamState],
                    adam_disc: &[AdamState],
                    iteration: u64,
                    lr: f64| GanCheckpoint {
        format_version: FORMAT_VERSION,
        target_speaker_id: target_speaker.clone(),
        crop_frames: crop,
        iteration,
        lr_current: lr,
        generator: gen.clone(),
        discriminator: disc.clone(),
        adam_states: adam_gen.iter().chain(adam_disc.iter()).cloned().collect(),
    };

    for iter in 0..config.total_iters {
        lr = lr_schedule(config.initial_lr, iter);

        // Aligned sample: same pair and crop window on both sides.
        let sample = |rng: &mut ChaCha8Rng| -> (Tensor4, Tensor4) {
            let mut real = Tensor4::zeros([batch, 1, FREQ_BINS, crop]);
            let mut ctrl = Tensor4::zeros([batch, 1, FREQ_BINS, crop]);
            for b in 0..batch {
                let pair = train_pairs[rng.gen_range(0..train_pairs.len())];
                let t = pair.n_frames();
                let start = if t > crop { rng.gen_range(0..=t - crop) } else { 0 };
                fill_crop(&mut real, b, &pair.target_fbank, start, crop);
                fill_crop(&mut ctrl, b, &pair.control_fbank, start, crop);
            }
            (real, ctrl)
        };

        // Discriminator step: real target crops vs generated fakes.
        let (real, ctrl) = sample(&mut rng);
        let fake = gen.forward(&ctrl)?;
        let (p_real, cache_real) = disc.forward_cached(&real)?;
        let (p_fake, cache_fake) = disc.forward_cached(&fake)?;
        let (loss_d, _) = bce_losses(&p_real, &p_fake)?;
        if !loss_d.is_finite() {
            return Err(GanError::NonFiniteLoss {
                loss: "discriminator",
                iteration: iter,
                checkpoint: Box::new(snapshot(&gen, &disc, &adam_gen, &adam_disc, iter, lr)),
            });
        }
        let (gp_real, gp_fake) = discriminator_loss_grads(&p_real, &p_fake);
        let mut d_grads = disc.backward(&cache_real, &gp_real)?;
        let d_grads_fake = disc.backward(&cache_fake, &gp_fake)?;
        d_grads.accumulate(&d_grads_fake);
        {
            let grads: Vec<(&Vec<f64>, &Vec<f64>)> = d_grads
                .convs
                .iter()
                .map(|(w, b)| (w, b))
                .chain(std::iter::once((&d_grads.fc.0, &d_grads.fc.1)))
                .collect();
            let params = disc_param_blocks(&mut disc);
            if let Err(e) = apply_updates(params, &grads, &mut adam_disc, lr) {
                return Err(match e {
                    GanError::Neural(crate::neural::NeuralError::NonFiniteGradient { .. }) => {
                        GanError::NonFiniteLoss {
                            loss: "discriminator",
                            iteration: iter,
                            checkpoint: Box::new(snapshot(
                                &gen, &disc, &adam_gen, &adam_disc, iter, lr,
                            )),
                        }
                    }
                    other => other,
                });
            }
        }

        // Generator step on a fresh batch.
        let (_, ctrl) = sample(&mut rng);
        let (fake, gen_cache) = gen.forward_cached(&ctrl)?;
        let (p_fake, disc_cache) = disc.forward_cached(&fake)?;
        let loss_g = generator_loss(&p_fake, config.generator_loss)?;
        if !loss_g.is_finite() {
            return Err(GanError::NonFiniteLoss {
                loss: "generator",
                iteration: iter,
                checkpoint: Box::new(snapshot(&gen, &disc, &adam_gen, &adam_disc, iter, lr)),
            });
        }
        let gp = generator_loss_grad(&p_fake, config.generator_loss);
        let disc_back = disc.backward(&disc_cache, &gp)?;
        let g_grads = gen.backward(&gen_cache, &disc_back.grad_input)?;
        {
            let grads: Vec<(&Vec<f64>, &Vec<f64>)> =
                g_grads.layers.iter().map(|(w, b)| (w, b)).collect();
            let params = gen_param_blocks(&mut gen);
            if let Err(e) = apply_updates(params, &grads, &mut adam_gen, lr) {
                return Err(match e {
                    GanError::Neural(crate::neural::NeuralError::NonFiniteGradient { .. }) => {
                        GanError::NonFiniteLoss {
                            loss: "generator",
                            iteration: iter,
                            checkpoint: Box::new(snapshot(
                                &gen, &disc, &adam_gen, &adam_disc, iter, lr,
                            )),
                        }
                    }
                    other => other,
                });
            }
        }

        if (iter + 1) % config.log_every == 0 {
            let holdout_l2 = mean_pair_distance(&gen, &metric_pairs)?;
            metrics.push(MetricsRow {
                iteration: iter + 1,
                loss_d,
                loss_g,
                holdout_l2,
            });
        }
    }

    Ok(TrainOutcome {
        checkpoint: snapshot(
            &gen,
            &disc,
            &adam_gen,
            &adam_disc,
            config.total_iters,
            lr,
        ),
        metrics,
        holdout_indices: holdout_idx,
    })
}
