//! Bias-corrected Adam with DCGAN-conventional betas.

use super::NeuralError;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    /// beta1 = 0.5, beta2 = 0.999, eps = 1e-8.
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
        }
    }
}

/// One Adam update; `name` identifies the parameter in diagnostics.
pub fn adam_step(
    name: &str,
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
) -> Result<(), NeuralError> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(NeuralError::ShapeMismatch {
            context: "adam_step",
            expected: state.first_moment.len().to_string(),
            got: format!("params:{} grads:{}", params.len(), grads.len()),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(NeuralError::NonFiniteGradient {
            param: name.to_string(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[i] / bc1;
        let v_hat = state.second_moment[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut params = vec![1.5, -2.0, 0.25];
        let mut state = AdamState::new(3, 0.01);
        adam_step("p", &mut params, &[0.0, 0.0, 0.0], &mut state).unwrap();
        assert_eq!(params, vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // Bias correction at t = 1 gives m_hat = g, v_hat = g^2, so the
        // update is -lr * g / (|g| + eps) = -lr * sign(g) in the small-eps limit.
        let mut params = vec![0.0, 0.0];
        let mut state = AdamState::new(2, 0.01);
        adam_step("p", &mut params, &[3.7, -0.002], &mut state).unwrap();
        assert!((params[0] + 0.01).abs() < 1e-6, "params[0]={}", params[0]);
        assert!((params[1] - 0.01).abs() < 1e-4, "params[1]={}", params[1]);
    }

    #[test]
    fn quadratic_descent_converges() {
        // Minimize f(p) = 0.5 * sum c_i (p_i - t_i)^2.
        let targets = [1.0, -2.0, 0.5, 3.0];
        let curv = [2.0, 0.5, 1.0, 4.0];
        let mut params = vec![0.0; 4];
        let mut state = AdamState::new(4, 0.05);
        let loss = |p: &[f64]| -> f64 {
            p.iter()
                .zip(&targets)
                .zip(&curv)
                .map(|((pi, ti), ci)| 0.5 * ci * (pi - ti) * (pi - ti))
                .sum()
        };
        let start = loss(&params);
        let mut prev = f64::INFINITY;
        for step in 0..200 {
            let grads: Vec<f64> = params
                .iter()
                .zip(&targets)
                .zip(&curv)
                .map(|((pi, ti), ci)| ci * (pi - ti))
                .collect();
            adam_step("p", &mut params, &grads, &mut state).unwrap();
            let l = loss(&params);
            if step >= 10 {
                assert!(l < prev, "loss not decreasing at step {step}: {l} >= {prev}");
            }
            prev = l;
        }
        assert!(prev < 1e-3 * start, "final={prev} start={start}");
    }

    #[test]
    fn non_finite_gradient_aborts_with_name() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, 0.01);
        match adam_step("gen.conv1.weight", &mut params, &[f64::NAN], &mut state) {
            Err(NeuralError::NonFiniteGradient { param }) => {
                assert_eq!(param, "gen.conv1.weight");
            }
            other => panic!("expected NonFiniteGradient, got {other:?}"),
        }
    }
}
