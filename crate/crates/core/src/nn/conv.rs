//! 1-D convolution over time with ReLU, spanning all input channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{accumulate_rows, Matrix, Vector};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1dParams {
    /// One `(kernel_len x in_channels)` matrix per filter.
    pub kernels: Vec<Matrix>,
    pub biases: Vector,
    pub kernel_len: usize,
    pub stride: usize,
    pub n_filters: usize,
    pub in_channels: usize,
}

/// Number of valid window positions for a length-`len` input.
pub fn conv_output_len(len: usize, kernel_len: usize, stride: usize) -> usize {
    if len < kernel_len {
        0
    } else {
        (len - kernel_len) / stride + 1
    }
}

impl Conv1dParams {
    pub fn zeros(in_channels: usize, n_filters: usize, kernel_len: usize, stride: usize) -> Result<Self> {
        if kernel_len == 0 || stride == 0 || n_filters == 0 || in_channels == 0 {
            return Err(Error::contract(format!(
                "conv1d needs positive kernel_len, stride, n_filters and in_channels \
                 (got {kernel_len}, {stride}, {n_filters}, {in_channels})"
            )));
        }
        Ok(Conv1dParams {
            kernels: vec![Matrix::zeros(kernel_len, in_channels); n_filters],
            biases: Vector::zeros(n_filters),
            kernel_len,
            stride,
            n_filters,
            in_channels,
        })
    }

    /// Uniform `±1/sqrt(kernel_len * in_channels)` kernels, filter-major then
    /// row-major within a kernel; zero biases.
    pub fn init(in_channels: usize, n_filters: usize, kernel_len: usize, stride: usize, rng: &mut Rng) -> Result<Self> {
        let mut p = Conv1dParams::zeros(in_channels, n_filters, kernel_len, stride)?;
        let bound = 1.0 / ((kernel_len * in_channels) as f64).sqrt();
        for k in &mut p.kernels {
            for w in k.data_mut() {
                *w = rng.uniform(-bound, bound)?;
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Conv1dParams::zeros(self.in_channels, self.n_filters, self.kernel_len, self.stride).expect("valid dims")
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = self.kernels.iter().map(Matrix::data).collect();
        t.push(self.biases.as_slice());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = self.kernels.iter_mut().map(Matrix::data_mut).collect();
        t.push(self.biases.as_mut_slice());
        t
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_len == 0 || self.stride == 0 || self.n_filters == 0 {
            return Err(Error::contract("conv1d dims must be positive"));
        }
        if self.kernels.len() != self.n_filters || self.biases.len() != self.n_filters {
            return Err(Error::shape(
                "Conv1dParams",
                format!("{} kernels / {} biases", self.kernels.len(), self.biases.len()),
                format!("{} filters", self.n_filters),
            ));
        }
        for k in &self.kernels {
            if k.shape() != (self.kernel_len, self.in_channels) {
                return Err(Error::shape("Conv1dParams", k.shape_str(), format!("{}x{}", self.kernel_len, self.in_channels)));
            }
        }
        Ok(())
    }

    /// Kernels transposed to `(kernel_len · in_channels) x n_filters`, so one
    /// pass over a window fills every filter.
    pub(crate) fn pack(&self) -> Vec<f64> {
        let nf = self.n_filters;
        let mut packed = vec![0.0; self.kernel_len * self.in_channels * nf];
        for (f, k) in self.kernels.iter().enumerate() {
            for (j, &w) in k.data().iter().enumerate() {
                packed[j * nf + f] = w;
            }
        }
        packed
    }

    /// Pre-activations over a row-major `(len x in_channels)` buffer, as a
    /// row-major `(positions x n_filters)` buffer.
    pub(crate) fn preactivations_flat(&self, xs: &[f64]) -> Vec<f64> {
        self.preactivations_packed(&self.pack(), xs)
    }

    /// Each output is `b + Σ_j w_j x_j` summed in index order.
    pub(crate) fn preactivations_packed(&self, packed: &[f64], xs: &[f64]) -> Vec<f64> {
        self.preactivations_strided(packed, xs, self.stride)
    }

    /// As [`Self::preactivations_packed`] with the kernel advanced `stride`
    /// frames between positions.
    pub(crate) fn preactivations_strided(&self, packed: &[f64], xs: &[f64], stride: usize) -> Vec<f64> {
        let c = self.in_channels;
        let len = xs.len() / c;
        let positions = conv_output_len(len, self.kernel_len, stride);
        let span = self.kernel_len * c;
        let nf = self.n_filters;
        let mut out = vec![0.0; positions * nf];
        for (p, row) in out.chunks_exact_mut(nf).enumerate() {
            let start = p * stride * c;
            row.copy_from_slice(&self.biases.0);
            accumulate_rows(&xs[start..start + span], packed, nf, row);
        }
        out
    }

    /// Accumulate kernel and bias gradients given the output gradient
    /// `dout` and the cached pre-activations.
    pub(crate) fn backward_flat(&self, xs: &[f64], pre: &[f64], dout: &[f64], grads: &mut Conv1dParams) {
        let c = self.in_channels;
        let span = self.kernel_len * c;
        let nf = self.n_filters;
        for (p, (dz_row, z_row)) in dout.chunks_exact(nf).zip(pre.chunks_exact(nf)).enumerate() {
            let start = p * self.stride * c;
            let window = &xs[start..start + span];
            for f in 0..nf {
                if z_row[f] <= 0.0 {
                    continue;
                }
                let dz = dz_row[f];
                grads.biases.0[f] += dz;
                for (g, &x) in grads.kernels[f].data_mut().iter_mut().zip(window) {
                    *g += dz * x;
                }
            }
        }
    }
}

pub fn conv1d_forward(params: &Conv1dParams, xs: &[Vector]) -> Result<Vec<Vector>> {
    if xs.len() < params.kernel_len {
        return Err(Error::contract(format!(
            "conv1d input of length {} is shorter than kernel_len {}",
            xs.len(),
            params.kernel_len
        )));
    }
    let mut flat = Vec::with_capacity(xs.len() * params.in_channels);
    for x in xs {
        if x.len() != params.in_channels {
            return Err(Error::shape("conv1d_forward", format!("x len {}", x.len()), format!("in_channels {}", params.in_channels)));
        }
        flat.extend_from_slice(&x.0);
    }
    let pre = params.preactivations_flat(&flat);
    Ok(pre
        .chunks_exact(params.n_filters)
        .map(|row| Vector(row.iter().map(|&z| z.max(0.0)).collect()))
        .collect())
}
