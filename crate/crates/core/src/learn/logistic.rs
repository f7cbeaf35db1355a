use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use super::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once every gradient component is below this magnitude.
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_iterations: 2000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Logistic {
    pub fn zeros(width: usize) -> Self {
        Self {
            weights: vec![0.0; width],
            bias: 0.0,
        }
    }

    /// Full-batch gradient ascent on the mean log-likelihood.
    pub fn fit(x: &Matrix, y: &[bool], cfg: LogisticConfig) -> Self {
        let mut model = Self::zeros(x.cols());
        let n = x.rows() as f64;
        let mut grad = vec![0.0; x.cols()];
        for _ in 0..cfg.max_iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for (row, &label) in x.iter_rows().zip(y) {
                let err = f64::from(u8::from(label)) - model.probability(row);
                for (g, &xi) in grad.iter_mut().zip(row) {
                    *g += err * xi;
                }
                grad_b += err;
            }
            let mut max_abs = (grad_b / n).abs();
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                let g = g / n;
                max_abs = max_abs.max(g.abs());
                *w += cfg.learning_rate * g;
            }
            model.bias += cfg.learning_rate * grad_b / n;
            if max_abs < cfg.tolerance {
                break;
            }
        }
        model
    }

    /// Posterior probability of ACK.
    pub fn probability(&self, x: &[f64]) -> f64 {
        let z = self.bias + self.weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        sigmoid(z)
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.probability(x) > 0.5
    }
}
