use serde::{Deserialize, Serialize};

use crate::feedback::{CATEGORICAL_FEATURES, NUM_FEATURES};

/// Row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(cols: usize, data: Vec<f64>) -> Self {
        assert!(cols > 0 && data.len() % cols == 0, "ragged matrix");
        Self { cols, data }
    }

    pub fn from_rows<I, R>(cols: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut data = Vec::new();
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        Self { cols, data }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Levels of a categorical feature by canonical index.
fn levels(feature: usize) -> &'static [f64] {
    match feature {
        2 => &[1.0, 2.0, 3.0],
        5 => &[0.0, 1.0, 2.0],
        _ => &[],
    }
}

pub fn is_categorical(feature: usize) -> bool {
    CATEGORICAL_FEATURES.contains(&feature)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Column {
    Numeric { feature: usize, mean: f64, scale: f64 },
    OneHot { feature: usize, level: f64 },
}

/// Standardizes numeric features and one-hot expands categorical ones, for
/// the gradient-trained families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    columns: Vec<Column>,
}

impl Encoder {
    pub fn fit(rows: &[[f64; NUM_FEATURES]], features: &[usize]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut columns = Vec::new();
        for &f in features {
            if is_categorical(f) {
                columns.extend(levels(f).iter().map(|&level| Column::OneHot { feature: f, level }));
            } else {
                let mean = rows.iter().map(|r| r[f]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n;
                let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                columns.push(Column::Numeric { feature: f, mean, scale });
            }
        }
        Self { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn encode_into(&self, row: &[f64; NUM_FEATURES], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.columns.iter().map(|c| match *c {
            Column::Numeric { feature, mean, scale } => (row[feature] - mean) / scale,
            Column::OneHot { feature, level } => {
                if row[feature] == level {
                    1.0
                } else {
                    0.0
                }
            }
        }));
    }

    pub fn encode(&self, rows: &[[f64; NUM_FEATURES]]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.width());
        let mut buf = Vec::with_capacity(self.width());
        for r in rows {
            self.encode_into(r, &mut buf);
            data.extend_from_slice(&buf);
        }
        Matrix::new(self.width(), data)
    }
}

/// Raw projection onto the selected canonical features (integer codes for
/// categorical ones).
pub fn project(rows: &[[f64; NUM_FEATURES]], features: &[usize]) -> Matrix {
    Matrix::from_rows(
        features.len(),
        rows.iter()
            .map(|r| features.iter().map(|&f| r[f]).collect::<Vec<_>>()),
    )
}
