//! Independent reference implementations: plain scalar loops, no library
//! numerics.

use flockact::nn::{LstmParams, LstmState, TrainConfig};
use flockact::numeric::{Matrix, Vector};
use flockact::rng::Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn row_dot(w: &Matrix, r: usize, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for (c, xc) in x.iter().enumerate() {
        s += w.get(r, c) * xc;
    }
    s
}

/// One peephole LSTM step evaluated unit by unit. Returns `(h, c)`.
pub fn scalar_lstm_step(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.hidden_dim;
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for u in 0..n {
        let i = sig(row_dot(&p.w_xi, u, x) + row_dot(&p.w_hi, u, h_prev) + p.w_ci.0[u] * c_prev[u] + p.b_i.0[u]);
        let f = sig(row_dot(&p.w_xf, u, x) + row_dot(&p.w_hf, u, h_prev) + p.w_cf.0[u] * c_prev[u] + p.b_f.0[u]);
        let g = (row_dot(&p.w_xc, u, x) + row_dot(&p.w_hc, u, h_prev) + p.b_c.0[u]).tanh();
        c[u] = f * c_prev[u] + i * g;
        let o = sig(row_dot(&p.w_xo, u, x) + row_dot(&p.w_ho, u, h_prev) + p.w_co.0[u] * c[u] + p.b_o.0[u]);
        h[u] = o * c[u].tanh();
    }
    (h, c)
}

pub struct CellInstance {
    pub params: LstmParams,
    pub x: Vector,
    pub prev: LstmState,
}

/// Random cell with every tensor, including biases and peepholes, nonzero.
pub fn random_cell(rng: &mut Rng) -> CellInstance {
    let d = 1 + rng.below(8) as usize;
    let n = 1 + rng.below(8) as usize;
    let mut params = LstmParams::init(d, n, true, rng);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.uniform(-0.5, 0.5).unwrap();
        }
    }
    let vec = |rng: &mut Rng, len: usize, s: f64| Vector((0..len).map(|_| rng.uniform(-s, s).unwrap()).collect());
    let x = vec(rng, d, 2.0);
    let prev = LstmState {
        h: vec(rng, n, 1.0),
        c: vec(rng, n, 2.0),
    };
    CellInstance { params, x, prev }
}

/// Largest absolute difference between the library cell and the scalar
/// oracle over `n` random instances.
pub fn cell_fidelity(n: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let inst = random_cell(&mut rng);
        let (state, _) = flockact::nn::lstm_cell_forward(&inst.params, &inst.x, &inst.prev).unwrap();
        let (h, c) = scalar_lstm_step(&inst.params, &inst.x.0, &inst.prev.h.0, &inst.prev.c.0);
        for (a, b) in state.h.0.iter().zip(&h).chain(state.c.0.iter().zip(&c)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Scripted Adam trajectory on one scalar, written out formula by formula.
pub fn adam_scalar_oracle(theta0: f64, grads: &[f64], cfg: &TrainConfig) -> Vec<f64> {
    let (b1, b2, lr, eps) = (cfg.adam_beta1, cfg.adam_beta2, cfg.learning_rate, cfg.adam_eps);
    let mut theta = theta0;
    let mut m = 0.0;
    let mut v = 0.0;
    let mut b1t = 1.0;
    let mut b2t = 1.0;
    let mut out = Vec::with_capacity(grads.len());
    for &g in grads {
        b1t *= b1;
        b2t *= b2;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1t);
        let v_hat = v / (1.0 - b2t);
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        out.push(theta);
    }
    out
}

pub const ADAM_SCRIPT: [f64; 10] = [0.5, -1.25, 3.0, 0.0, -0.01, 2.5, -4.0, 0.75, 1e-3, -0.3];

/// Largest deviation between the library update and the oracle on the
/// scripted gradients.
pub fn adam_fidelity(cfg: &TrainConfig) -> f64 {
    let expected = adam_scalar_oracle(0.7, &ADAM_SCRIPT, cfg);
    let mut theta = [0.7];
    let mut m = [0.0];
    let mut v = [0.0];
    let mut worst = 0.0f64;
    for (k, g) in ADAM_SCRIPT.iter().enumerate() {
        flockact::nn::adam_update(&mut theta, &[*g], &mut m, &mut v, k as u64 + 1, cfg).unwrap();
        worst = worst.max((theta[0] - expected[k]).abs());
    }
    worst
}
