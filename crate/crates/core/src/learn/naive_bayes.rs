use serde::{Deserialize, Serialize};

use super::encode::Matrix;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassStats {
    count: usize,
    means: Vec<f64>,
    variances: Vec<f64>,
}

/// Gaussian naive Bayes over the raw selected features. Index 0 of every
/// per-class array is NAK, index 1 is ACK.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    classes: [ClassStats; 2],
}

impl GaussianNb {
    /// Fits per-class moments. A class may be absent; it then never wins.
    pub fn fit(x: &Matrix, y: &[bool], variance_floor: f64) -> Self {
        let stats = |class: bool| {
            let rows: Vec<&[f64]> = x
                .iter_rows()
                .zip(y)
                .filter(|(_, &label)| label == class)
                .map(|(r, _)| r)
                .collect();
            let n = rows.len();
            let mut means = vec![0.0; x.cols()];
            let mut variances = vec![variance_floor; x.cols()];
            if n > 0 {
                for (j, m) in means.iter_mut().enumerate() {
                    *m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
                }
                for (j, v) in variances.iter_mut().enumerate() {
                    let var = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n as f64;
                    *v = var.max(variance_floor);
                }
            }
            ClassStats {
                count: n,
                means,
                variances,
            }
        };
        Self {
            classes: [stats(false), stats(true)],
        }
    }

    fn log_joint(&self, class: usize, x: &[f64]) -> f64 {
        let s = &self.classes[class];
        if s.count == 0 {
            return f64::NEG_INFINITY;
        }
        let total = (self.classes[0].count + self.classes[1].count) as f64;
        let mut acc = (s.count as f64 / total).ln();
        for ((&xi, &mu), &var) in x.iter().zip(&s.means).zip(&s.variances) {
            acc -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (xi - mu).powi(2) / var);
        }
        acc
    }

    /// ACK iff its joint likelihood is strictly larger.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.log_joint(1, x) > self.log_joint(0, x)
    }
}
