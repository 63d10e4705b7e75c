use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Vector};
use crate::rng::Rng;

/// Affine classification head producing logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Vector,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseParams {
            w: Matrix::zeros(out_dim, in_dim),
            b: Vector::zeros(out_dim),
        }
    }

    pub fn init(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut p = DenseParams::zeros(in_dim, out_dim);
        for w in p.w.data_mut() {
            *w = rng.uniform(-bound, bound).expect("positive bound");
        }
        p
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn zeros_like(&self) -> Self {
        DenseParams::zeros(self.in_dim(), self.out_dim())
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.data(), self.b.as_slice()]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.data_mut(), self.b.as_mut_slice()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.len() != self.out_dim() {
            return Err(Error::shape("DenseParams", self.w.shape_str(), format!("bias len {}", self.b.len())));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.0.clone();
        self.w.matvec_acc(x, &mut y);
        y
    }
}
