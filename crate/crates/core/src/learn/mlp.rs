//! One-hidden-layer perceptron with sigmoid units and cross-entropy loss.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use super::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    /// `hidden x inputs`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Mlp {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let r1 = 1.0 / (inputs.max(1) as f64).sqrt();
        let r2 = 1.0 / (hidden.max(1) as f64).sqrt();
        Self {
            inputs,
            hidden,
            w1: (0..hidden * inputs).map(|_| rng.random_range(-r1..=r1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-r2..=r2)).collect(),
            b2: 0.0,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.parameter_count());
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, rest) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
    }

    fn hidden_activations(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let w = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            let z = self.b1[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            *hj = sigmoid(z);
        }
    }

    fn logit(&self, h: &[f64]) -> f64 {
        self.b2 + self.w2.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.hidden_activations(x, &mut h);
        sigmoid(self.logit(&h))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.probability(x) > 0.5
    }

    /// Mean binary cross-entropy.
    pub fn loss(&self, x: &Matrix, y: &[bool]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let total: f64 = x
            .iter_rows()
            .zip(y)
            .map(|(row, &label)| {
                self.hidden_activations(row, &mut h);
                let z = self.logit(&h);
                softplus(z) - if label { z } else { 0.0 }
            })
            .sum();
        total / x.rows() as f64
    }

    /// Gradient of the mean loss over `rows`, flattened like
    /// [`Mlp::parameters`].
    pub fn gradient(&self, x: &Matrix, y: &[bool]) -> Vec<f64> {
        let rows: Vec<usize> = (0..x.rows()).collect();
        let mut grad = vec![0.0; self.parameter_count()];
        self.accumulate_gradient(x, y, &rows, &mut grad);
        let n = rows.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        grad
    }

    fn accumulate_gradient(&self, x: &Matrix, y: &[bool], rows: &[usize], grad: &mut [f64]) {
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        let mut h = vec![0.0; self.hidden];
        for &i in rows {
            let row = x.row(i);
            self.hidden_activations(row, &mut h);
            let delta_out = sigmoid(self.logit(&h)) - f64::from(u8::from(y[i]));
            gb2[0] += delta_out;
            for j in 0..self.hidden {
                gw2[j] += delta_out * h[j];
                let delta = delta_out * self.w2[j] * h[j] * (1.0 - h[j]);
                gb1[j] += delta;
                let gw = &mut gw1[j * self.inputs..(j + 1) * self.inputs];
                for (g, &xi) in gw.iter_mut().zip(row) {
                    *g += delta * xi;
                }
            }
        }
    }

    /// Mini-batch gradient descent for a fixed number of epochs. Returns the
    /// trained network and the full-data loss after each epoch.
    pub fn fit(x: &Matrix, y: &[bool], cfg: MlpConfig, seed: u64) -> (Self, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::init(x.cols(), cfg.hidden, &mut rng);
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut grad = vec![0.0; net.parameter_count()];
        let mut params = net.parameters();
        let mut history = Vec::with_capacity(cfg.epochs);
        let batch = cfg.batch_size.max(1);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                net.accumulate_gradient(x, y, chunk, &mut grad);
                let step = cfg.learning_rate / chunk.len() as f64;
                for (p, g) in params.iter_mut().zip(&grad) {
                    *p -= step * g;
                }
                net.set_parameters(&params);
            }
            history.push(net.loss(x, y));
        }
        (net, history)
    }
}
