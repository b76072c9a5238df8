//! Binary-cross-entropy losses for the adversarial objective.
//!
//! The discriminator descends `-mean(log p_real) - mean(log(1 - p_fake))`,
//! i.e. gradient ascent on the value function via descent on its negation.
//! The generator uses the non-saturating surrogate `-mean(log p_fake)` by
//! default; the literal minimax inner term `mean(log(1 - p_fake))` stays
//! available for A/B comparisons.

use super::NeuralError;

/// Probabilities are clamped to `[1e-7, 1 - 1e-7]` before any log.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorLossKind {
    #[default]
    NonSaturating,
    SaturatingMinimax,
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `(loss_D, loss_G)` for the given discriminator outputs.
pub fn bce_losses(d_real: &[f64], d_fake: &[f64]) -> Result<(f64, f64), NeuralError> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(NeuralError::EmptyBatch("bce_losses"));
    }
    let loss_d = -mean(d_real, |p| clamp(p).ln()) - mean(d_fake, |p| (1.0 - clamp(p)).ln());
    let loss_g = generator_loss(d_fake, GeneratorLossKind::NonSaturating)?;
    Ok((loss_d, loss_g))
}

pub fn generator_loss(d_fake: &[f64], kind: GeneratorLossKind) -> Result<f64, NeuralError> {
    if d_fake.is_empty() {
        return Err(NeuralError::EmptyBatch("generator_loss"));
    }
    Ok(match kind {
        GeneratorLossKind::NonSaturating => -mean(d_fake, |p| clamp(p).ln()),
        GeneratorLossKind::SaturatingMinimax => mean(d_fake, |p| (1.0 - clamp(p)).ln()),
    })
}

/// d loss_D / d p for the real and fake probability batches.
///
/// Gradients are zero where the clamp saturates.
pub fn discriminator_loss_grads(d_real: &[f64], d_fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nr = d_real.len() as f64;
    let nf = d_fake.len() as f64;
    let grad_real = d_real
        .iter()
        .map(|&p| if in_open_range(p) { -1.0 / (nr * p) } else { 0.0 })
        .collect();
    let grad_fake = d_fake
        .iter()
        .map(|&p| {
            if in_open_range(p) {
                1.0 / (nf * (1.0 - p))
            } else {
                0.0
            }
        })
        .collect();
    (grad_real, grad_fake)
}

/// d loss_G / d p for the fake probability batch.
pub fn generator_loss_grad(d_fake: &[f64], kind: GeneratorLossKind) -> Vec<f64> {
    let n = d_fake.len() as f64;
    d_fake
        .iter()
        .map(|&p| {
            if !in_open_range(p) {
                0.0
            } else {
                match kind {
                    GeneratorLossKind::NonSaturating => -1.0 / (n * p),
                    GeneratorLossKind::SaturatingMinimax => -1.0 / (n * (1.0 - p)),
                }
            }
        })
        .collect()
}

fn in_open_range(p: f64) -> bool {
    p > PROB_CLAMP && p < 1.0 - PROB_CLAMP
}

fn mean(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    xs.iter().map(|&x| f(x)).sum::<f64>() / xs.len() as f64
}
