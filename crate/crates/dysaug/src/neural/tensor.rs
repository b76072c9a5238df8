//! Row-major batch x channel x freq x time tensor with an optional gradient slot.

use super::NeuralError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor4 {
    pub fn zeros(shape: [usize; 4]) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            grad: None,
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self, NeuralError> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(NeuralError::DataLength {
                expected: n,
                got: data.len(),
            });
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        ((b * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.index(b, c, h, w)]
    }

    /// Allocates the gradient slot (zeroed) if absent.
    pub fn ensure_grad(&mut self) -> &mut Vec<f64> {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        self.grad.as_mut().unwrap()
    }

    pub fn shape_string(&self) -> String {
        format!(
            "{}x{}x{}x{}",
            self.shape[0], self.shape[1], self.shape[2], self.shape[3]
        )
    }
}
