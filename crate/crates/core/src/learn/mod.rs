//! Supervised classification of feedback signals.
//!
//! Four model families are trained from scratch on labeled feedback
//! features. [`train_select`] runs the full selection loop: per family, pick a
//! feature subset by greedy forward selection on validation accuracy, fit on
//! the training split, and keep the model with the highest validation
//! accuracy.

mod encode;
mod logistic;
mod mlp;
mod naive_bayes;
mod tree;

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feedback::{AckState, FeedbackFeatures, LabeledExample, FEATURE_NAMES, NUM_FEATURES};

pub use encode::{Encoder, Matrix};
pub use logistic::{Logistic, LogisticConfig};
pub use mlp::{Mlp, MlpConfig};
pub use naive_bayes::{GaussianNb, DEFAULT_VARIANCE_FLOOR};
pub use tree::{DecisionTree, TreeConfig};

const MODEL_FORMAT: &str = "ncml-classifier";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dataset is empty")]
    Empty,
    #[error("need at least two examples to split, got {0}")]
    TooSmall(usize),
    #[error("{0} requires both ACK and NAK examples")]
    SingleClass(Family),
    #[error("train fraction {0} outside (0, 1)")]
    TrainFraction(f64),
    #[error("feature subset is empty or out of range")]
    BadFeatures,
    #[error("no candidate family could be trained: {0}")]
    NoCandidate(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    GaussianNaiveBayes,
    DecisionTree,
    LogisticRegression,
    Mlp,
}

impl Family {
    /// Fixed enumeration order; earlier families win validation ties.
    pub const ALL: [Family; 4] = [
        Self::GaussianNaiveBayes,
        Self::DecisionTree,
        Self::LogisticRegression,
        Self::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GaussianNaiveBayes => "nb",
            Self::DecisionTree => "tree",
            Self::LogisticRegression => "logistic",
            Self::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nb" | "naive-bayes" | "gaussiannb" => Ok(Self::GaussianNaiveBayes),
            "tree" | "decision-tree" => Ok(Self::DecisionTree),
            "logistic" | "logreg" => Ok(Self::LogisticRegression),
            "mlp" | "nn" => Ok(Self::Mlp),
            other => Err(format!("unknown model family {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Self {
        Self { examples }
    }

    pub fn feature_names() -> &'static [&'static str; NUM_FEATURES] {
        &FEATURE_NAMES
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// `(nak, ack)` counts.
    pub fn label_counts(&self) -> (usize, usize) {
        let ack = self.examples.iter().filter(|e| e.label.is_ack()).count();
        (self.len() - ack, ack)
    }

    pub fn has_both_classes(&self) -> bool {
        let (nak, ack) = self.label_counts();
        nak > 0 && ack > 0
    }

    fn rows(&self) -> Vec<[f64; NUM_FEATURES]> {
        self.examples.iter().map(|e| e.features.to_vector()).collect()
    }

    fn labels(&self) -> Vec<bool> {
        self.examples.iter().map(|e| e.label.is_ack()).collect()
    }
}

impl FromIterator<LabeledExample> for Dataset {
    fn from_iter<T: IntoIterator<Item = LabeledExample>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Hyper-parameters of every family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variance_floor: f64,
    pub tree: TreeConfig,
    pub logistic: LogisticConfig,
    pub mlp: MlpConfig,
    /// Seeds weight initialization and batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            tree: TreeConfig::default(),
            logistic: LogisticConfig::default(),
            mlp: MlpConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    GaussianNaiveBayes(GaussianNb),
    DecisionTree(DecisionTree),
    LogisticRegression { encoder: Encoder, model: Logistic },
    Mlp { encoder: Encoder, network: Mlp },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub family: Family,
    /// Canonical feature indices, ascending.
    pub selected_features: Vec<usize>,
    pub params: ModelParams,
    /// Accuracy on the validation split it was selected with; zero until
    /// evaluated.
    pub validation_accuracy: f64,
}

impl ClassifierModel {
    fn predict_vector(&self, v: &[f64; NUM_FEATURES]) -> bool {
        match &self.params {
            ModelParams::GaussianNaiveBayes(nb) => nb.predict(&self.project(v)),
            ModelParams::DecisionTree(tree) => tree.predict(&self.project(v)),
            ModelParams::LogisticRegression { encoder, model } => {
                let mut buf = Vec::with_capacity(encoder.width());
                encoder.encode_into(v, &mut buf);
                model.predict(&buf)
            }
            ModelParams::Mlp { encoder, network } => {
                let mut buf = Vec::with_capacity(encoder.width());
                encoder.encode_into(v, &mut buf);
                network.predict(&buf)
            }
        }
    }

    fn project(&self, v: &[f64; NUM_FEATURES]) -> Vec<f64> {
        self.selected_features.iter().map(|&f| v[f]).collect()
    }

    pub fn predict(&self, features: &FeedbackFeatures) -> AckState {
        AckState::from_received(self.predict_vector(&features.to_vector()))
    }

    /// Writes the self-describing text form.
    pub fn save<W: io::Write>(&self, writer: W) -> Result<(), LearnError> {
        let doc = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            model: self.clone(),
        };
        serde_json::to_writer_pretty(writer, &doc).map_err(|e| LearnError::Format(e.to_string()))
    }

    pub fn load<R: io::Read>(reader: R) -> Result<Self, LearnError> {
        let doc: ModelFile =
            serde_json::from_reader(reader).map_err(|e| LearnError::Format(e.to_string()))?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(LearnError::Format(format!(
                "unsupported model format {} v{}",
                doc.format, doc.version
            )));
        }
        let m = doc.model;
        if m.selected_features.is_empty() || m.selected_features.iter().any(|&f| f >= NUM_FEATURES)
        {
            return Err(LearnError::BadFeatures);
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    feature_names: Vec<String>,
    model: ClassifierModel,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Stratified random split into `(train, validation)`.
///
/// Each class is shuffled with a generator seeded from `spec.seed` and its
/// first `round(fraction * class_size)` members go to training. Both sides
/// keep the original relative order.
pub fn split(data: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset), LearnError> {
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    if data.len() < 2 {
        return Err(LearnError::TooSmall(data.len()));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(LearnError::TrainFraction(spec.train_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for class in [AckState::Nak, AckState::Ack] {
        let mut idx: Vec<usize> = (0..data.len())
            .filter(|&i| data.examples[i].label == class)
            .collect();
        idx.shuffle(&mut rng);
        let k = (spec.train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..k]);
        validation.extend_from_slice(&idx[k..]);
    }
    if train.is_empty() {
        train.push(validation.pop().expect("len >= 2"));
    } else if validation.is_empty() {
        validation.push(train.pop().expect("len >= 2"));
    }
    train.sort_unstable();
    validation.sort_unstable();
    let pick = |idx: Vec<usize>| Dataset::new(idx.into_iter().map(|i| data.examples[i]).collect());
    Ok((pick(train), pick(validation)))
}

/// Fits one family on the given canonical feature subset.
pub fn train(
    family: Family,
    data: &Dataset,
    features: &[usize],
    cfg: &TrainConfig,
) -> Result<ClassifierModel, LearnError> {
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    let mut selected = features.to_vec();
    selected.sort_unstable();
    selected.dedup();
    if selected.is_empty() || selected.iter().any(|&f| f >= NUM_FEATURES) {
        return Err(LearnError::BadFeatures);
    }
    if family != Family::GaussianNaiveBayes && !data.has_both_classes() {
        return Err(LearnError::SingleClass(family));
    }
    let rows = data.rows();
    let y = data.labels();
    let params = match family {
        Family::GaussianNaiveBayes => ModelParams::GaussianNaiveBayes(GaussianNb::fit(
            &encode::project(&rows, &selected),
            &y,
            cfg.variance_floor,
        )),
        Family::DecisionTree => ModelParams::DecisionTree(DecisionTree::fit(
            &encode::project(&rows, &selected),
            &y,
            cfg.tree,
        )),
        Family::LogisticRegression => {
            let encoder = Encoder::fit(&rows, &selected);
            let model = Logistic::fit(&encoder.encode(&rows), &y, cfg.logistic);
            ModelParams::LogisticRegression { encoder, model }
        }
        Family::Mlp => {
            let encoder = Encoder::fit(&rows, &selected);
            let (network, _) = Mlp::fit(&encoder.encode(&rows), &y, cfg.mlp, cfg.seed);
            ModelParams::Mlp { encoder, network }
        }
    };
    Ok(ClassifierModel {
        family,
        selected_features: selected,
        params,
        validation_accuracy: 0.0,
    })
}

pub fn predict(model: &ClassifierModel, features: &FeedbackFeatures) -> AckState {
    model.predict(features)
}

/// Fraction of examples whose predicted label matches.
pub fn evaluate(model: &ClassifierModel, data: &Dataset) -> Result<f64, LearnError> {
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    let hits = data
        .examples
        .iter()
        .filter(|e| model.predict(&e.features) == e.label)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Greedy forward feature selection on validation accuracy.
///
/// Starts empty and repeatedly adds the feature with the largest accuracy
/// gain, stopping when nothing improves. The best single feature is always
/// kept. Features constant across the training split cannot carry
/// information and are not candidates unless every feature is constant.
pub fn choose_attributes(
    data: &Dataset,
    family: Family,
    validation: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<usize>, LearnError> {
    if data.is_empty() || validation.is_empty() {
        return Err(LearnError::Empty);
    }
    let rows = data.rows();
    let mut candidates: Vec<usize> = (0..NUM_FEATURES)
        .filter(|&f| rows.iter().any(|r| r[f] != rows[0][f]))
        .collect();
    if candidates.is_empty() {
        candidates = (0..NUM_FEATURES).collect();
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;
    while !candidates.is_empty() {
        let mut round_best: Option<(f64, usize)> = None;
        for &f in &candidates {
            let mut trial = selected.clone();
            trial.push(f);
            let model = train(family, data, &trial, cfg)?;
            let acc = evaluate(&model, validation)?;
            if round_best.is_none_or(|(a, _)| acc > a) {
                round_best = Some((acc, f));
            }
        }
        let (acc, f) = round_best.expect("non-empty candidates");
        if acc <= best_acc {
            break;
        }
        best_acc = acc;
        selected.push(f);
        candidates.retain(|&c| c != f);
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Outcome of the selection loop, including every candidate for inspection.
#[derive(Debug)]
pub struct Selection {
    pub best: ClassifierModel,
    pub candidates: Vec<ClassifierModel>,
    pub failures: Vec<(Family, LearnError)>,
    pub validation: Dataset,
}

/// Trains every requested family and returns the model with the highest
/// validation accuracy; ties go to the earlier family in [`Family::ALL`].
pub fn train_select(
    data: &Dataset,
    families: &[Family],
    spec: SplitSpec,
    cfg: &TrainConfig,
) -> Result<Selection, LearnError> {
    let (train_set, validation) = split(data, spec)?;
    let mut ordered: Vec<Family> = Family::ALL
        .into_iter()
        .filter(|f| families.contains(f))
        .collect();
    ordered.dedup();
    let results: Vec<(Family, Result<ClassifierModel, LearnError>)> = ordered
        .par_iter()
        .map(|&family| {
            let fitted = choose_attributes(&train_set, family, &validation, cfg)
                .and_then(|feats| train(family, &train_set, &feats, cfg))
                .and_then(|mut model| {
                    model.validation_accuracy = evaluate(&model, &validation)?;
                    Ok(model)
                });
            (family, fitted)
        })
        .collect();
    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for (family, r) in results {
        match r {
            Ok(m) => candidates.push(m),
            Err(e) => failures.push((family, e)),
        }
    }
    let mut best: Option<&ClassifierModel> = None;
    for m in &candidates {
        if best.is_none_or(|b| m.validation_accuracy > b.validation_accuracy) {
            best = Some(m);
        }
    }
    let best = match best {
        Some(b) => b.clone(),
        None => {
            let msg = failures
                .iter()
                .map(|(f, e)| format!("{f}: {e}"))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(LearnError::NoCandidate(msg));
        }
    };
    Ok(Selection {
        best,
        candidates,
        failures,
        validation,
    })
}

#[cfg(test)]
mod tests;
