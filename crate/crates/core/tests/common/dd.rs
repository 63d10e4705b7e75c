//! Double-double arithmetic (about 32 significant digits) and a scalar
//! re-implementation of the model forward pass on top of it. Central
//! differences of this loss are free of the roundoff that limits f64
//! differences at small step sizes.

use std::ops::{Add, Div, Mul, Neg, Sub};

use flockact::nn::Model;
use flockact::pipeline::FeatureWindow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.3190468138462996e-17,
    };

    pub fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn from_pair((hi, lo): (f64, f64)) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Multiply by an exact power of two.
    fn scale(self, p: f64) -> Dd {
        Dd { hi: self.hi * p, lo: self.lo * p }
    }

    pub fn is_positive(self) -> bool {
        self.hi > 0.0 || (self.hi == 0.0 && self.lo > 0.0)
    }

    pub fn max(self, other: Dd) -> Dd {
        if (self - other).is_positive() {
            self
        } else {
            other
        }
    }

    pub fn exp(self) -> Dd {
        if self.hi < -700.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / Dd::LN2.hi).round();
        let r = (self - Dd::LN2 * Dd::new(k)).scale(1.0 / 1024.0);
        // Taylor series of exp(r) - 1 for |r| < 4e-4
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / Dd::new(n as f64);
            sum = sum + term;
        }
        // (1 + s)^2 - 1 = s (2 + s), repeated ten times
        for _ in 0..10 {
            sum = sum * (sum + Dd::new(2.0));
        }
        (sum + Dd::ONE).scale(2f64.powi(k as i32))
    }

    pub fn ln(self) -> Dd {
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn tanh(self) -> Dd {
        if self.hi.abs() > 20.0 {
            let e = (Dd::new(-2.0) * Dd::new(self.hi.abs())).exp();
            let t = Dd::ONE - Dd::new(2.0) * e;
            return if self.hi < 0.0 { -t } else { t };
        }
        let e = (self.scale(2.0)).exp();
        (e - Dd::ONE) / (e + Dd::ONE)
    }

    pub fn sigmoid(self) -> Dd {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::from_pair((s, e + f))
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        Dd::from_pair((p, e + (self.hi * b.lo + self.lo * b.hi)))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        Dd::from_pair((q1, q2)) + Dd::new(q3)
    }
}

fn dot(w: &[Dd], x: &[Dd]) -> Dd {
    w.iter().zip(x).fold(Dd::ZERO, |s, (a, b)| s + *a * *b)
}

/// Cross-entropy loss of `model` on `window`, evaluated in double-double
/// with every parameter read from the canonical tensor list; `params` holds
/// those tensors, possibly perturbed.
pub fn dd_loss(model: &Model, params: &[Vec<Dd>], window: &FeatureWindow<'_>, target: &[f64]) -> Dd {
    let d = window.dim;
    let stats = &model.feature_stats;
    let mut xs: Vec<Vec<Dd>> = window
        .data
        .chunks_exact(d)
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &x)| (Dd::new(x) - Dd::new(stats.mean[j])) / Dd::new(stats.std[j]))
                .collect()
        })
        .collect();

    let mut next = 0;
    let mut take = || {
        next += 1;
        &params[next - 1]
    };
    if let Some(conv) = &model.net.conv {
        let kernels: Vec<&Vec<Dd>> = (0..conv.n_filters).map(|_| take()).collect();
        let biases = take();
        let (kl, stride) = (conv.kernel_len, conv.stride);
        let positions = (xs.len() - kl) / stride + 1;
        xs = (0..positions)
            .map(|p| {
                (0..conv.n_filters)
                    .map(|f| {
                        let mut z = biases[f];
                        for r in 0..kl {
                            for c in 0..d {
                                z = z + kernels[f][r * d + c] * xs[p * stride + r][c];
                            }
                        }
                        z.max(Dd::ZERO)
                    })
                    .collect()
            })
            .collect();
    }

    let l = &model.net.lstm;
    let (din, n) = (l.input_dim, l.hidden_dim);
    let [w_xi, w_hi, w_ci, w_xf, w_hf, w_cf, w_xc, w_hc, w_xo, w_ho, w_co, b_i, b_f, b_c, b_o] = std::array::from_fn(|_| take());
    let peep = |w: &Vec<Dd>, u: usize, c: Dd| if l.peepholes { w[u] * c } else { Dd::ZERO };
    let mut h = vec![Dd::ZERO; n];
    let mut c = vec![Dd::ZERO; n];
    for x in &xs {
        let mut h2 = vec![Dd::ZERO; n];
        let mut c2 = vec![Dd::ZERO; n];
        for u in 0..n {
            let row = |w: &Vec<Dd>, width: usize, v: &[Dd]| dot(&w[u * width..(u + 1) * width], v);
            let i = (row(w_xi, din, x) + row(w_hi, n, &h) + peep(w_ci, u, c[u]) + b_i[u]).sigmoid();
            let f = (row(w_xf, din, x) + row(w_hf, n, &h) + peep(w_cf, u, c[u]) + b_f[u]).sigmoid();
            let g = (row(w_xc, din, x) + row(w_hc, n, &h) + b_c[u]).tanh();
            c2[u] = f * c[u] + i * g;
            let o = (row(w_xo, din, x) + row(w_ho, n, &h) + peep(w_co, u, c2[u]) + b_o[u]).sigmoid();
            h2[u] = o * c2[u].tanh();
        }
        h = h2;
        c = c2;
    }

    let (w, b) = (take(), take());
    let k = target.len();
    let logits: Vec<Dd> = (0..k).map(|j| b[j] + dot(&w[j * n..(j + 1) * n], &h)).collect();
    let top = logits.iter().copied().fold(logits[0], Dd::max);
    let exps: Vec<Dd> = logits.iter().map(|&z| (z - top).exp()).collect();
    let total = exps.iter().copied().fold(Dd::ZERO, |s, e| s + e);
    let mut loss = Dd::ZERO;
    for (e, &t) in exps.iter().zip(target) {
        if t != 0.0 {
            let p = (*e / total).max(Dd::new(1e-12));
            loss = loss - Dd::new(t) * p.ln();
        }
    }
    loss
}

/// Compare every analytic gradient with a double-double central difference
/// (step 1e-5). Same tolerances as the f64 check.
pub fn check_gradients_dd(model: &Model, w: &FeatureWindow<'_>, target: &[f64]) -> super::GradReport {
    let (_, cache) = model.forward_with_mask(w, None).unwrap();
    let grads = model.backward(&cache, target).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut params: Vec<Vec<Dd>> = model.net.tensors().iter().map(|t| t.iter().map(|&v| Dd::new(v)).collect()).collect();
    let h = Dd::new(1e-5);
    let mut report = super::GradReport { checked: 0, failures: Vec::new(), max_rel: 0.0 };
    for ti in 0..params.len() {
        for ei in 0..params[ti].len() {
            let orig = params[ti][ei];
            params[ti][ei] = orig + h;
            let up = dd_loss(model, &params, w, target);
            params[ti][ei] = orig - h;
            let down = dd_loss(model, &params, w, target);
            params[ti][ei] = orig;
            let numeric = ((up - down) / (h + h)).to_f64();
            let a = analytic[ti][ei];
            report.checked += 1;
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-8 {
                report.max_rel = report.max_rel.max((a - numeric).abs() / scale);
            }
            if !super::grad_close(a, numeric) {
                report.failures.push(format!("tensor {ti} elem {ei}: analytic {a:e} numeric {numeric:e}"));
            }
        }
    }
    report
}
