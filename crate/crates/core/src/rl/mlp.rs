//! A small fully connected network with tanh hidden layers and a linear
//! output, stored as one flat parameter vector.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    theta: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input followed by every hidden layer's post-tanh output.
    acts: Vec<Vec<f64>>,
}

fn layer_len(inp: usize, out: usize) -> usize {
    inp * out + out
}

/// A `rows x cols` matrix with orthonormal rows (or columns, whichever are
/// fewer), scaled by `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (n, d) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for u in &q {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
        }
    }
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            w[r * cols + c] = gain * if rows <= cols { q[r][c] } else { q[c][r] };
        }
    }
    w
}

impl Mlp {
    /// `sizes` lists input, hidden and output widths. Hidden layers use
    /// `hidden_gain`, the output layer `output_gain`; biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let mut theta = Vec::new();
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let gain = if l == last { output_gain } else { hidden_gain };
            theta.extend(orthogonal(w[1], w[0], gain, rng));
            theta.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Mlp {
            sizes: sizes.to_vec(),
            theta,
        }
    }

    pub fn from_parts(sizes: Vec<usize>, theta: Vec<f64>) -> Option<Self> {
        let expected: usize = sizes.windows(2).map(|w| layer_len(w[0], w[1])).sum();
        (sizes.len() >= 2 && theta.len() == expected).then_some(Mlp { sizes, theta })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    /// Names and slices of each weight matrix and bias vector.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let nw = w[0] * w[1];
            out.push((format!("l{l}.weight"), &self.theta[off..off + nw]));
            out.push((format!("l{l}.bias"), &self.theta[off + nw..off + nw + w[1]]));
            off += nw + w[1];
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Trace) {
        debug_assert_eq!(x.len(), self.sizes[0]);
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        let n_layers = self.sizes.len() - 1;
        let mut out = Vec::new();
        for l in 0..n_layers {
            let (inp, outd) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.theta[off..off + inp * outd];
            let b = &self.theta[off + inp * outd..off + layer_len(inp, outd)];
            let a = acts.last().expect("input pushed");
            let z: Vec<f64> = (0..outd)
                .map(|o| b[o] + w[o * inp..(o + 1) * inp].iter().zip(a).map(|(w, a)| w * a).sum::<f64>())
                .collect();
            off += layer_len(inp, outd);
            if l + 1 == n_layers {
                out = z;
            } else {
                acts.push(z.into_iter().map(f64::tanh).collect());
            }
        }
        (out, Trace { acts })
    }

    /// Adds d(loss)/d(theta) to `grad`, given d(loss)/d(output).
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += layer_len(self.sizes[l], self.sizes[l + 1]);
        }
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (inp, outd) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let a = &trace.acts[l];
            for o in 0..outd {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * inp..off + (o + 1) * inp];
                row.iter_mut().zip(a).for_each(|(g, a)| *g += d * a);
                grad[off + inp * outd + o] += d;
            }
            if l > 0 {
                let w = &self.theta[off..off + inp * outd];
                delta = (0..inp)
                    .map(|i| {
                        let back: f64 = (0..outd).map(|o| w[o * inp + i] * delta[o]).sum();
                        back * (1.0 - a[i] * a[i])
                    })
                    .collect();
            }
        }
    }
}
