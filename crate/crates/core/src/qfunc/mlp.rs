use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Two tanh hidden layers of equal width and a linear output layer, over a
/// flat parameter vector laid out as `W1 b1 W2 b2 W3 b3` (row-major, one row
/// per output unit).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    x: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub out: Vec<f64>,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Mlp { inputs, hidden, outputs }
    }

    pub fn num_params(&self) -> usize {
        let (i, h, o) = (self.inputs, self.hidden, self.outputs);
        h * i + h + h * h + h + o * h + o
    }

    fn offsets(&self) -> [usize; 6] {
        let (i, h, o) = (self.inputs, self.hidden, self.outputs);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        [w1, b1, w2, b2, w3, b3]
    }

    /// Uniform `+-1/sqrt(fan_in)` weights, zero biases. With `zero_output`
    /// the last layer starts at zero so every output is exactly 0.
    pub fn init(&self, rng: &mut Stream, zero_output: bool) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        let [w1, b1, w2, b2, w3, _] = self.offsets();
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in &mut p[range] {
                *w = rng.random_range(-bound..bound);
            }
        };
        fill(w1..b1, self.inputs);
        fill(w2..b2, self.hidden);
        if !zero_output {
            fill(w3..w3 + self.outputs * self.hidden, self.hidden);
        }
        p
    }

    fn dense(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
        let n_in = x.len();
        for (j, o) in out.iter_mut().enumerate() {
            let row = &w[j * n_in..(j + 1) * n_in];
            *o = b[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn forward_cached(&self, params: &[f64], x: &[f64], cache: &mut MlpCache) {
        debug_assert_eq!(params.len(), self.num_params());
        debug_assert_eq!(x.len(), self.inputs);
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let h = self.hidden;
        cache.x.clear();
        cache.x.extend_from_slice(x);
        cache.h1.resize(h, 0.0);
        cache.h2.resize(h, 0.0);
        cache.out.resize(self.outputs, 0.0);
        Self::dense(&params[w1..b1], &params[b1..w2], x, &mut cache.h1);
        cache.h1.iter_mut().for_each(|v| *v = v.tanh());
        Self::dense(&params[w2..b2], &params[b2..w3], &cache.h1, &mut cache.h2);
        cache.h2.iter_mut().for_each(|v| *v = v.tanh());
        Self::dense(&params[w3..b3], &params[b3..], &cache.h2, &mut cache.out);
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward_cached(params, x, &mut cache);
        cache.out
    }

    /// Accumulate `d(sum_o dout[o] * out[o]) / d(params)` into `grad`.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, dout: &[f64], grad: &mut [f64]) {
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let (n_in, h) = (self.inputs, self.hidden);
        let mut dz2 = vec![0.0; h];
        for (o, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad[b3 + o] += d;
            let row = w3 + o * h;
            for j in 0..h {
                grad[row + j] += d * cache.h2[j];
                dz2[j] += params[row + j] * d;
            }
        }
        for j in 0..h {
            dz2[j] *= 1.0 - cache.h2[j] * cache.h2[j];
        }
        let mut dz1 = vec![0.0; h];
        for j in 0..h {
            let d = dz2[j];
            grad[b2 + j] += d;
            let row = w2 + j * h;
            for k in 0..h {
                grad[row + k] += d * cache.h1[k];
                dz1[k] += params[row + k] * d;
            }
        }
        for k in 0..h {
            let d = dz1[k] * (1.0 - cache.h1[k] * cache.h1[k]);
            grad[b1 + k] += d;
            let row = w1 + k * n_in;
            for (i, &xi) in cache.x.iter().enumerate() {
                if xi != 0.0 {
                    grad[row + i] += d * xi;
                }
            }
        }
    }
}
