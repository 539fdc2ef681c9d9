//! Dense row-major tensors of f64.
//!
//! Everything the generator learns lives in these: embedding matrices, LSTM
//! gate weights, projection matrices, and all intermediate vectors. Desk-scale
//! sizes (vocabularies of a few hundred, cells of 64-128 units) make doubles
//! the right choice: gradient checks come out tight and speed is a non-issue.

use crate::error::{Error, Result};
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; n],
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor::from_values",
                expected: format!("{n} values for shape {shape:?}"),
                got: format!("{} values", values.len()),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor {
            shape: vec![1],
            values: vec![v],
        }
    }

    /// Uniform initialization in [lo, hi) from a seeded generator.
    pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut DetRng) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: (0..n).map(|_| rng.uniform(lo, hi)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn is_vector(&self) -> bool {
        self.shape.len() == 1
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.values[0]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }
}
