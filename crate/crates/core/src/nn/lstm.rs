//! Peephole LSTM cell and many-to-one sequence fold.
//!
//! Per step, with `⊙` the elementwise product and peepholes stored as
//! per-unit diagonal vectors `w_ci`, `w_cf`, `w_co`:
//!
//! ```text
//! i_t = σ(W_xi x_t + W_hi h_{t-1} + w_ci ⊙ C_{t-1} + b_i)
//! f_t = σ(W_xf x_t + W_hf h_{t-1} + w_cf ⊙ C_{t-1} + b_f)
//! C_t = f_t ⊙ C_{t-1} + i_t ⊙ tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = σ(W_xo x_t + W_ho h_{t-1} + w_co ⊙ C_t + b_o)
//! h_t = o_t ⊙ tanh(C_t)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{accumulate_rows, sigmoid_scalar, Matrix, Vector};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// When false the peephole vectors are held at zero and receive no gradient.
    pub peepholes: bool,
    pub w_xi: Matrix,
    pub w_hi: Matrix,
    pub w_ci: Vector,
    pub w_xf: Matrix,
    pub w_hf: Matrix,
    pub w_cf: Vector,
    pub w_xc: Matrix,
    pub w_hc: Matrix,
    pub w_xo: Matrix,
    pub w_ho: Matrix,
    pub w_co: Vector,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vector,
    pub c: Vector,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            h: Vector::zeros(hidden_dim),
            c: Vector::zeros(hidden_dim),
        }
    }
}

/// Everything one step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmSequenceCache {
    pub steps: Vec<LstmStepCache>,
    /// Inverted-dropout multipliers applied to the final hidden output.
    pub mask: Option<Vec<f64>>,
}

pub(crate) struct PackedGates {
    /// `input_dim` rows of `4 · hidden_dim`, gate order i, f, c, o.
    wx: Vec<f64>,
    /// `hidden_dim` rows of `4 · hidden_dim`.
    wh: Vec<f64>,
    bias: Vec<f64>,
}

impl LstmSequenceCache {
    pub fn last_hidden(&self) -> &[f64] {
        &self.steps.last().expect("nonempty sequence").h
    }
}

fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-bound, bound).expect("positive bound"))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn uniform_vector(rng: &mut Rng, len: usize, bound: f64) -> Vector {
    Vector(
        (0..len)
            .map(|_| rng.uniform(-bound, bound).expect("positive bound"))
            .collect(),
    )
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, peepholes: bool) -> Self {
        let wx = || Matrix::zeros(hidden_dim, input_dim);
        let wh = || Matrix::zeros(hidden_dim, hidden_dim);
        let v = || Vector::zeros(hidden_dim);
        LstmParams {
            input_dim,
            hidden_dim,
            peepholes,
            w_xi: wx(),
            w_hi: wh(),
            w_ci: v(),
            w_xf: wx(),
            w_hf: wh(),
            w_cf: v(),
            w_xc: wx(),
            w_hc: wh(),
            w_xo: wx(),
            w_ho: wh(),
            w_co: v(),
            b_i: v(),
            b_f: v(),
            b_c: v(),
            b_o: v(),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights drawn in field order
    /// (`w_xi, w_hi, w_ci, w_xf, ..., w_co`); biases start at zero. Peephole
    /// vectors take the hidden size as fan-in and are skipped (left zero, no
    /// draws) when peepholes are disabled.
    pub fn init(input_dim: usize, hidden_dim: usize, peepholes: bool, rng: &mut Rng) -> Self {
        let bx = 1.0 / (input_dim as f64).sqrt();
        let bh = 1.0 / (hidden_dim as f64).sqrt();
        let mut p = LstmParams::zeros(input_dim, hidden_dim, peepholes);
        let peep = |rng: &mut Rng| {
            if peepholes {
                uniform_vector(rng, hidden_dim, bh)
            } else {
                Vector::zeros(hidden_dim)
            }
        };
        p.w_xi = uniform_matrix(rng, hidden_dim, input_dim, bx);
        p.w_hi = uniform_matrix(rng, hidden_dim, hidden_dim, bh);
        p.w_ci = peep(rng);
        p.w_xf = uniform_matrix(rng, hidden_dim, input_dim, bx);
        p.w_hf = uniform_matrix(rng, hidden_dim, hidden_dim, bh);
        p.w_cf = peep(rng);
        p.w_xc = uniform_matrix(rng, hidden_dim, input_dim, bx);
        p.w_hc = uniform_matrix(rng, hidden_dim, hidden_dim, bh);
        p.w_xo = uniform_matrix(rng, hidden_dim, input_dim, bx);
        p.w_ho = uniform_matrix(rng, hidden_dim, hidden_dim, bh);
        p.w_co = peep(rng);
        p
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.input_dim, self.hidden_dim, self.peepholes)
    }

    /// Parameter tensors in canonical order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_xi.data(),
            self.w_hi.data(),
            self.w_ci.as_slice(),
            self.w_xf.data(),
            self.w_hf.data(),
            self.w_cf.as_slice(),
            self.w_xc.data(),
            self.w_hc.data(),
            self.w_xo.data(),
            self.w_ho.data(),
            self.w_co.as_slice(),
            self.b_i.as_slice(),
            self.b_f.as_slice(),
            self.b_c.as_slice(),
            self.b_o.as_slice(),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_xi.data_mut(),
            self.w_hi.data_mut(),
            self.w_ci.as_mut_slice(),
            self.w_xf.data_mut(),
            self.w_hf.data_mut(),
            self.w_cf.as_mut_slice(),
            self.w_xc.data_mut(),
            self.w_hc.data_mut(),
            self.w_xo.data_mut(),
            self.w_ho.data_mut(),
            self.w_co.as_mut_slice(),
            self.b_i.as_mut_slice(),
            self.b_f.as_mut_slice(),
            self.b_c.as_mut_slice(),
            self.b_o.as_mut_slice(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden_dim);
        for (name, m) in [
            ("w_xi", &self.w_xi),
            ("w_xf", &self.w_xf),
            ("w_xc", &self.w_xc),
            ("w_xo", &self.w_xo),
        ] {
            if m.shape() != (h, d) {
                return Err(Error::shape("LstmParams", format!("{name} {}", m.shape_str()), format!("{h}x{d}")));
            }
        }
        for (name, m) in [
            ("w_hi", &self.w_hi),
            ("w_hf", &self.w_hf),
            ("w_hc", &self.w_hc),
            ("w_ho", &self.w_ho),
        ] {
            if m.shape() != (h, h) {
                return Err(Error::shape("LstmParams", format!("{name} {}", m.shape_str()), format!("{h}x{h}")));
            }
        }
        for (name, v) in [
            ("w_ci", &self.w_ci),
            ("w_cf", &self.w_cf),
            ("w_co", &self.w_co),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_c", &self.b_c),
            ("b_o", &self.b_o),
        ] {
            if v.len() != h {
                return Err(Error::shape("LstmParams", format!("{name} len {}", v.len()), h));
            }
        }
        Ok(())
    }

    /// One step on raw slices; lengths must already be checked.
    /// Gate weights regrouped so that one pass over `x` (and one over `h`)
    /// fills all four gate pre-activations.
    pub(crate) fn pack(&self) -> PackedGates {
        let (d, hd) = (self.input_dim, self.hidden_dim);
        let width = 4 * hd;
        let transpose = |ms: [&Matrix; 4], cols: usize| {
            let mut out = Vec::with_capacity(cols * width);
            for j in 0..cols {
                for m in ms {
                    out.extend(m.data().iter().skip(j).step_by(cols).copied());
                }
            }
            out
        };
        let wx = transpose([&self.w_xi, &self.w_xf, &self.w_xc, &self.w_xo], d);
        let wh = transpose([&self.w_hi, &self.w_hf, &self.w_hc, &self.w_ho], hd);
        let mut bias = Vec::with_capacity(width);
        for b in [&self.b_i, &self.b_f, &self.b_c, &self.b_o] {
            bias.extend_from_slice(&b.0);
        }
        PackedGates { wx, wh, bias }
    }

    pub(crate) fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStepCache {
        self.step_packed(&self.pack(), x, h_prev, c_prev)
    }

    /// Pre-activations accumulate as `b + Σ_j x_j W[:, j] + Σ_k h_k W[:, k]`,
    /// in index order.
    fn step_packed(&self, packed: &PackedGates, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStepCache {
        let hdim = self.hidden_dim;
        let width = 4 * hdim;
        let mut z = packed.bias.clone();
        accumulate_rows(x, &packed.wx, width, &mut z);
        accumulate_rows(h_prev, &packed.wh, width, &mut z);
        let (ai, rest) = z.split_at(hdim);
        let (af, rest) = rest.split_at(hdim);
        let (ag, ao) = rest.split_at(hdim);

        let mut i = vec![0.0; hdim];
        let mut f = vec![0.0; hdim];
        let mut g = vec![0.0; hdim];
        let mut o = vec![0.0; hdim];
        let mut c = vec![0.0; hdim];
        let mut tanh_c = vec![0.0; hdim];
        let mut h = vec![0.0; hdim];
        for u in 0..hdim {
            let (pi, pf, po) = if self.peepholes {
                (self.w_ci.0[u], self.w_cf.0[u], self.w_co.0[u])
            } else {
                (0.0, 0.0, 0.0)
            };
            i[u] = sigmoid_scalar(ai[u] + pi * c_prev[u]);
            f[u] = sigmoid_scalar(af[u] + pf * c_prev[u]);
            g[u] = ag[u].tanh();
            c[u] = f[u] * c_prev[u] + i[u] * g[u];
            o[u] = sigmoid_scalar(ao[u] + po * c[u]);
            tanh_c[u] = c[u].tanh();
            h[u] = o[u] * tanh_c[u];
        }
        LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        }
    }

    pub(crate) fn forward_flat(&self, xs: &[f64], mask: Option<Vec<f64>>) -> LstmSequenceCache {
        self.forward_packed(&self.pack(), xs, mask)
    }

    pub(crate) fn forward_packed(&self, packed: &PackedGates, xs: &[f64], mask: Option<Vec<f64>>) -> LstmSequenceCache {
        let d = self.input_dim;
        let zeros = vec![0.0; self.hidden_dim];
        let mut steps: Vec<LstmStepCache> = Vec::with_capacity(xs.len() / d.max(1));
        for x in xs.chunks_exact(d) {
            let step = match steps.last() {
                Some(prev) => self.step_packed(packed, x, &prev.h, &prev.c),
                None => self.step_packed(packed, x, &zeros, &zeros),
            };
            steps.push(step);
        }
        LstmSequenceCache { steps, mask }
    }

    /// Rows of `b + Σ_j x_j W[:, j]`, one per input row: the part of every
    /// gate pre-activation that does not depend on the recurrent state.
    pub(crate) fn input_projections(&self, packed: &PackedGates, xs: &[f64]) -> Vec<f64> {
        let width = 4 * self.hidden_dim;
        let mut out = Vec::with_capacity(xs.len() / self.input_dim.max(1) * width);
        for x in xs.chunks_exact(self.input_dim) {
            let start = out.len();
            out.extend_from_slice(&packed.bias);
            accumulate_rows(x, &packed.wx, width, &mut out[start..]);
        }
        out
    }

    /// Final hidden output of the fold from the zero state, without keeping
    /// per-step caches. Same arithmetic as [`Self::forward_packed`].
    pub(crate) fn last_hidden_packed(&self, packed: &PackedGates, xs: &[f64]) -> Vec<f64> {
        let proj = self.input_projections(packed, xs);
        self.last_hidden_projected(packed, proj.chunks_exact(4 * self.hidden_dim))
    }

    /// As [`Self::last_hidden_packed`], from rows of
    /// [`Self::input_projections`].
    pub(crate) fn last_hidden_projected<'p>(&self, packed: &PackedGates, projections: impl IntoIterator<Item = &'p [f64]>) -> Vec<f64> {
        let hdim = self.hidden_dim;
        let mut h = vec![0.0; hdim];
        let mut c = vec![0.0; hdim];
        let mut z = vec![0.0; 4 * hdim];
        for p in projections {
            z.copy_from_slice(p);
            accumulate_rows(&h, &packed.wh, 4 * hdim, &mut z);
            for u in 0..hdim {
                let (pi, pf, po) = if self.peepholes {
                    (self.w_ci.0[u], self.w_cf.0[u], self.w_co.0[u])
                } else {
                    (0.0, 0.0, 0.0)
                };
                let i = sigmoid_scalar(z[u] + pi * c[u]);
                let f = sigmoid_scalar(z[hdim + u] + pf * c[u]);
                let g = z[2 * hdim + u].tanh();
                c[u] = f * c[u] + i * g;
                let o = sigmoid_scalar(z[3 * hdim + u] + po * c[u]);
                h[u] = o * c[u].tanh();
            }
        }
        h
    }

    /// Backpropagate `dh_last` (gradient on the pre-dropout final output)
    /// through the whole sequence, accumulating into `grads`. Returns the
    /// per-step input gradients when `want_dx` is set.
    pub(crate) fn backward_sequence(
        &self,
        cache: &LstmSequenceCache,
        dh_last: &[f64],
        grads: &mut LstmParams,
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let (d, hd) = (self.input_dim, self.hidden_dim);
        let width = 4 * hd;
        let n = cache.steps.len();
        let mut dxs = want_dx.then(|| vec![0.0; n * d]);
        // rows t of `da`: gate pre-activation gradients in order i, f, c, o
        let mut da = vec![0.0; n * width];
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; hd];
        for t in (0..n).rev() {
            let step = &cache.steps[t];
            let row = &mut da[t * width..(t + 1) * width];
            for u in 0..hd {
                let (pi, pf, po) = if self.peepholes {
                    (self.w_ci.0[u], self.w_cf.0[u], self.w_co.0[u])
                } else {
                    (0.0, 0.0, 0.0)
                };
                let o = step.o[u];
                let tc = step.tanh_c[u];
                let da_o = dh[u] * tc * o * (1.0 - o);
                // C_t reaches the loss through h_t, the o-gate peephole and step t+1
                let dct = dc[u] + dh[u] * o * (1.0 - tc * tc) + da_o * po;
                let (i, f, g) = (step.i[u], step.f[u], step.g[u]);
                let da_i = dct * g * i * (1.0 - i);
                let da_g = dct * i * (1.0 - g * g);
                let da_f = dct * step.c_prev[u] * f * (1.0 - f);
                dc[u] = dct * f + da_i * pi + da_f * pf;
                row[u] = da_i;
                row[hd + u] = da_f;
                row[2 * hd + u] = da_g;
                row[3 * hd + u] = da_o;
            }
            dh.iter_mut().for_each(|v| *v = 0.0);
            let gates_h = [&self.w_hi, &self.w_hf, &self.w_hc, &self.w_ho];
            for (da_gate, m) in row.chunks_exact(hd).zip(gates_h) {
                accumulate_rows(da_gate, m.data(), hd, &mut dh);
            }
            if let Some(buf) = dxs.as_mut() {
                let gates_x = [&self.w_xi, &self.w_xf, &self.w_xc, &self.w_xo];
                for (da_gate, m) in row.chunks_exact(hd).zip(gates_x) {
                    accumulate_rows(da_gate, m.data(), d, &mut buf[t * d..(t + 1) * d]);
                }
            }
        }

        // weight gradients for the whole sequence: dW^T += X^T · DA
        let mut xt = vec![0.0; d * n];
        let mut ht = vec![0.0; hd * n];
        for (t, step) in cache.steps.iter().enumerate() {
            for j in 0..d {
                xt[j * n + t] = step.x[j];
            }
            for k in 0..hd {
                ht[k * n + t] = step.h_prev[k];
            }
        }
        let mut dwx = vec![0.0; d * width];
        let mut dwh = vec![0.0; hd * width];
        for j in 0..d {
            accumulate_rows(&xt[j * n..(j + 1) * n], &da, width, &mut dwx[j * width..(j + 1) * width]);
        }
        for k in 0..hd {
            accumulate_rows(&ht[k * n..(k + 1) * n], &da, width, &mut dwh[k * width..(k + 1) * width]);
        }
        let gx = [&mut grads.w_xi, &mut grads.w_xf, &mut grads.w_xc, &mut grads.w_xo];
        for (gate, m) in gx.into_iter().enumerate() {
            let data = m.data_mut();
            for u in 0..hd {
                for j in 0..d {
                    data[u * d + j] += dwx[j * width + gate * hd + u];
                }
            }
        }
        let gh = [&mut grads.w_hi, &mut grads.w_hf, &mut grads.w_hc, &mut grads.w_ho];
        for (gate, m) in gh.into_iter().enumerate() {
            let data = m.data_mut();
            for u in 0..hd {
                for k in 0..hd {
                    data[u * hd + k] += dwh[k * width + gate * hd + u];
                }
            }
        }
        for (t, step) in cache.steps.iter().enumerate() {
            let row = &da[t * width..(t + 1) * width];
            for u in 0..hd {
                let (da_i, da_f, da_g, da_o) = (row[u], row[hd + u], row[2 * hd + u], row[3 * hd + u]);
                if self.peepholes {
                    grads.w_ci.0[u] += da_i * step.c_prev[u];
                    grads.w_cf.0[u] += da_f * step.c_prev[u];
                    grads.w_co.0[u] += da_o * step.c[u];
                }
                grads.b_i.0[u] += da_i;
                grads.b_f.0[u] += da_f;
                grads.b_c.0[u] += da_g;
                grads.b_o.0[u] += da_o;
            }
        }
        dxs
    }
}

/// Single LSTM step with shape checks.
pub fn lstm_cell_forward(
    params: &LstmParams,
    x_t: &Vector,
    prev: &LstmState,
) -> Result<(LstmState, LstmStepCache)> {
    if x_t.len() != params.input_dim {
        return Err(Error::shape("lstm_cell_forward", format!("x_t len {}", x_t.len()), format!("input_dim {}", params.input_dim)));
    }
    if prev.h.len() != params.hidden_dim || prev.c.len() != params.hidden_dim {
        return Err(Error::shape(
            "lstm_cell_forward",
            format!("state lens ({}, {})", prev.h.len(), prev.c.len()),
            format!("hidden_dim {}", params.hidden_dim),
        ));
    }
    let cache = params.step(&x_t.0, &prev.h.0, &prev.c.0);
    let state = LstmState {
        h: Vector(cache.h.clone()),
        c: Vector(cache.c.clone()),
    };
    Ok((state, cache))
}

/// Draw an inverted-dropout mask: each unit is kept with probability
/// `1 - rate` and scaled by `1 / (1 - rate)`.
pub fn dropout_mask(rng: &mut Rng, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.next_f64() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Many-to-one fold from the zero state. Returns the final hidden output
/// (with `mask` applied if given) and the full cache.
pub fn lstm_sequence_forward(
    params: &LstmParams,
    xs: &[Vector],
    mask: Option<Vec<f64>>,
) -> Result<(Vector, LstmSequenceCache)> {
    if xs.is_empty() {
        return Err(Error::contract("lstm_sequence_forward on an empty sequence"));
    }
    let mut flat = Vec::with_capacity(xs.len() * params.input_dim);
    for x in xs {
        if x.len() != params.input_dim {
            return Err(Error::shape("lstm_sequence_forward", format!("x len {}", x.len()), format!("input_dim {}", params.input_dim)));
        }
        flat.extend_from_slice(&x.0);
    }
    if let Some(m) = &mask {
        if m.len() != params.hidden_dim {
            return Err(Error::shape("lstm_sequence_forward", format!("mask len {}", m.len()), params.hidden_dim));
        }
    }
    let cache = params.forward_flat(&flat, mask);
    let mut h = cache.last_hidden().to_vec();
    if let Some(m) = &cache.mask {
        for (v, k) in h.iter_mut().zip(m) {
            *v *= k;
        }
    }
    Ok((Vector(h), cache))
}
