//! Dense and gated-recurrent layers with hand-written reverse passes.
//!
//! Gradients are accumulated into a layer of the same shape, so a zeroed copy
//! of the parameters doubles as the gradient buffer.

use rand::Rng as _;

use crate::rng::Rng;

use super::params::TensorRef;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eˣ) without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn uniform(rng: &mut Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// `y = W x + b`, W row-major `n_out × n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { n_in, n_out, weight: vec![0.0; n_in * n_out], bias: vec![0.0; n_out] }
    }

    /// Uniform in ±1/√n_in.
    pub fn init(n_in: usize, n_out: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        Self { n_in, n_out, weight: uniform(rng, n_in * n_out, bound), bias: uniform(rng, n_out, bound) }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_in);
        self.weight
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.n_in];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &self.weight[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut grad.weight[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }

    pub(crate) fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(TensorRef::new(format!("{prefix}.weight"), vec![self.n_out, self.n_in], &self.weight));
        out.push(TensorRef::new(format!("{prefix}.bias"), vec![self.n_out], &self.bias));
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}

/// Gated recurrent cell with update gate `z`, reset gate `r` and candidate `n`:
///
/// ```text
/// z = σ(W_z x + U_z h + b_z)
/// r = σ(W_r x + U_r h + b_r)
/// n = tanh(W_n x + U_n (r ⊙ h) + b_n)
/// h' = (1 − z) ⊙ n + z ⊙ h
/// ```
///
/// Gate blocks are stacked in the order z, r, n.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    pub n_in: usize,
    pub n_hidden: usize,
    /// `3H × n_in`
    pub w_input: Vec<f64>,
    /// `3H × H`
    pub w_hidden: Vec<f64>,
    /// `3H`
    pub bias: Vec<f64>,
}

/// Values saved by one forward step.
#[derive(Clone, Debug)]
pub struct GruStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

fn matvec_acc(w: &[f64], cols: usize, row0: usize, rows: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let row = &w[(row0 + i) * cols..(row0 + i + 1) * cols];
        out[i] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl GruCell {
    pub fn zeros(n_in: usize, n_hidden: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            w_input: vec![0.0; 3 * n_hidden * n_in],
            w_hidden: vec![0.0; 3 * n_hidden * n_hidden],
            bias: vec![0.0; 3 * n_hidden],
        }
    }

    /// Uniform in ±1/√H.
    pub fn init(n_in: usize, n_hidden: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (n_hidden as f64).sqrt();
        Self {
            n_in,
            n_hidden,
            w_input: uniform(rng, 3 * n_hidden * n_in, bound),
            w_hidden: uniform(rng, 3 * n_hidden * n_hidden, bound),
            bias: uniform(rng, 3 * n_hidden, bound),
        }
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruStep) {
        let h = self.n_hidden;
        let mut a = self.bias.clone();
        matvec_acc(&self.w_input, self.n_in, 0, 3 * h, x, &mut a);
        matvec_acc(&self.w_hidden, h, 0, 2 * h, h_prev, &mut a[..2 * h]);
        let z: Vec<f64> = a[..h].iter().map(|&v| sigmoid(v)).collect();
        let r: Vec<f64> = a[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        matvec_acc(&self.w_hidden, h, 2 * h, h, &rh, &mut a[2 * h..]);
        let n: Vec<f64> = a[2 * h..].iter().map(|v| v.tanh()).collect();
        let h_new = (0..h).map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i]).collect();
        (h_new, GruStep { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, n, rh })
    }

    /// Reverse pass of one step. Adds into `dx` and writes `dh_prev`.
    pub fn step_backward(&self, st: &GruStep, dh: &[f64], grad: &mut GruCell, dx: &mut [f64]) -> Vec<f64> {
        let h = self.n_hidden;
        let ni = self.n_in;
        let mut da = vec![0.0; 3 * h];
        let mut dh_prev = vec![0.0; h];
        for i in 0..h {
            let dn = dh[i] * (1.0 - st.z[i]);
            let dz = dh[i] * (st.h_prev[i] - st.n[i]);
            dh_prev[i] = dh[i] * st.z[i];
            da[2 * h + i] = dn * (1.0 - st.n[i] * st.n[i]);
            da[i] = dz * st.z[i] * (1.0 - st.z[i]);
        }
        // Candidate path through r ⊙ h.
        let mut drh = vec![0.0; h];
        for i in 0..h {
            let g = da[2 * h + i];
            if g == 0.0 {
                continue;
            }
            let row = &self.w_hidden[(2 * h + i) * h..(2 * h + i + 1) * h];
            let grow = &mut grad.w_hidden[(2 * h + i) * h..(2 * h + i + 1) * h];
            for k in 0..h {
                drh[k] += g * row[k];
                grow[k] += g * st.rh[k];
            }
        }
        for k in 0..h {
            let dr = drh[k] * st.h_prev[k];
            dh_prev[k] += drh[k] * st.r[k];
            da[h + k] = dr * st.r[k] * (1.0 - st.r[k]);
        }
        // Gate paths through h_prev.
        for i in 0..2 * h {
            let g = da[i];
            if g == 0.0 {
                continue;
            }
            let row = &self.w_hidden[i * h..(i + 1) * h];
            let grow = &mut grad.w_hidden[i * h..(i + 1) * h];
            for k in 0..h {
                dh_prev[k] += g * row[k];
                grow[k] += g * st.h_prev[k];
            }
        }
        // Input weights and biases for all three blocks.
        for i in 0..3 * h {
            let g = da[i];
            if g == 0.0 {
                continue;
            }
            grad.bias[i] += g;
            let row = &self.w_input[i * ni..(i + 1) * ni];
            let grow = &mut grad.w_input[i * ni..(i + 1) * ni];
            for j in 0..ni {
                dx[j] += g * row[j];
                grow[j] += g * st.x[j];
            }
        }
        dh_prev
    }

    /// Runs over `xs` from a zero state. Outputs are indexed by time; steps
    /// are in processing order.
    pub fn run(&self, xs: &[Vec<f64>], reverse: bool) -> (Vec<Vec<f64>>, Vec<GruStep>) {
        let t_len = xs.len();
        let mut outs = vec![Vec::new(); t_len];
        let mut steps = Vec::with_capacity(t_len);
        let mut h = vec![0.0; self.n_hidden];
        for p in 0..t_len {
            let t = if reverse { t_len - 1 - p } else { p };
            let (h_new, st) = self.step(&xs[t], &h);
            outs[t] = h_new.clone();
            steps.push(st);
            h = h_new;
        }
        (outs, steps)
    }

    /// Backpropagation through time. `d_outs` is indexed by time; returns
    /// input gradients indexed by time.
    pub fn run_backward(
        &self,
        steps: &[GruStep],
        d_outs: &[Vec<f64>],
        reverse: bool,
        grad: &mut GruCell,
    ) -> Vec<Vec<f64>> {
        let t_len = steps.len();
        let mut dxs = vec![vec![0.0; self.n_in]; t_len];
        let mut carry = vec![0.0; self.n_hidden];
        for p in (0..t_len).rev() {
            let t = if reverse { t_len - 1 - p } else { p };
            let dh: Vec<f64> = carry.iter().zip(&d_outs[t]).map(|(a, b)| a + b).collect();
            carry = self.step_backward(&steps[p], &dh, grad, &mut dxs[t]);
        }
        dxs
    }

    pub(crate) fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        let h3 = 3 * self.n_hidden;
        out.push(TensorRef::new(format!("{prefix}.w_input"), vec![h3, self.n_in], &self.w_input));
        out.push(TensorRef::new(format!("{prefix}.w_hidden"), vec![h3, self.n_hidden], &self.w_hidden));
        out.push(TensorRef::new(format!("{prefix}.bias"), vec![h3], &self.bias));
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(&mut self.w_input);
        out.push(&mut self.w_hidden);
        out.push(&mut self.bias);
    }
}
