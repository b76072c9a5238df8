//! Elementwise activations and the fully-connected layer.

use super::{NeuralError, Tensor4};

pub fn relu_forward(x: &Tensor4) -> Tensor4 {
    let mut out = x.clone();
    out.grad = None;
    for v in out.data.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Subgradient 0 at exactly zero.
pub fn relu_backward(x: &Tensor4, upstream: &Tensor4) -> Result<Tensor4, NeuralError> {
    if x.shape != upstream.shape {
        return Err(NeuralError::ShapeMismatch {
            context: "relu upstream gradient",
            expected: x.shape_string(),
            got: upstream.shape_string(),
        });
    }
    let mut out = Tensor4::zeros(x.shape);
    for i in 0..x.data.len() {
        out.data[i] = if x.data[i] > 0.0 { upstream.data[i] } else { 0.0 };
    }
    Ok(out)
}

/// Numerically stable logistic: evaluated on the branch that never
/// exponentiates a large positive argument.
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sigmoid_scalar(v)).collect()
}

/// Gradient in terms of the forward output: `y * (1 - y)`.
pub fn sigmoid_backward(y: &[f64], upstream: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(upstream)
        .map(|(&yv, &u)| yv * (1.0 - yv) * u)
        .collect()
}

/// Affine map `y = W x + b` with `W` stored row-major `[out][in]`.
#[derive(Debug, Clone)]
pub struct FcLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub struct FcGrads {
    pub grad_x: Vec<f64>,
    pub grad_w: Vec<f64>,
    pub grad_b: Vec<f64>,
}

impl FcLayer {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        fc_forward(x, &self.weights, &self.bias, self.in_dim, self.out_dim)
    }

    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<FcGrads, NeuralError> {
        fc_backward(
            x,
            upstream,
            &self.weights,
            self.in_dim,
            self.out_dim,
        )
    }
}

pub fn fc_forward(
    x: &[f64],
    weights: &[f64],
    bias: &[f64],
    in_dim: usize,
    out_dim: usize,
) -> Result<Vec<f64>, NeuralError> {
    if x.len() != in_dim {
        return Err(NeuralError::ShapeMismatch {
            context: "fc input",
            expected: in_dim.to_string(),
            got: x.len().to_string(),
        });
    }
    let mut out = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = &weights[o * in_dim..(o + 1) * in_dim];
        let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
        out.push(dot + bias[o]);
    }
    Ok(out)
}

pub fn fc_backward(
    x: &[f64],
    upstream: &[f64],
    weights: &[f64],
    in_dim: usize,
    out_dim: usize,
) -> Result<FcGrads, NeuralError> {
    if x.len() != in_dim || upstream.len() != out_dim {
        return Err(NeuralError::ShapeMismatch {
            context: "fc backward",
            expected: format!("x:{in_dim} upstream:{out_dim}"),
            got: format!("x:{} upstream:{}", x.len(), upstream.len()),
        });
    }
    let mut grad_x = vec![0.0; in_dim];
    let mut grad_w = vec![0.0; in_dim * out_dim];
    for o in 0..out_dim {
        let u = upstream[o];
        let row = &weights[o * in_dim..(o + 1) * in_dim];
        let grow = &mut grad_w[o * in_dim..(o + 1) * in_dim];
        for i in 0..in_dim {
            grad_x[i] += u * row[i];
            grow[i] = u * x[i];
        }
    }
    Ok(FcGrads {
        grad_x,
        grad_w,
        grad_b: upstream.to_vec(),
    })
}
