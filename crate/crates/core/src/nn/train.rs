use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::loss::{argmax, softmax, softmax_cross_entropy};
use super::model::{ModelId, ModelSpec, Network};
use super::{NnError, Tensor};
use crate::dataset::{augment, AugmentConfig};
use crate::gesture::{DigitImage, IMAGE_PIXELS, IMAGE_SIDE};

const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Applied on the fly to every training batch when set.
    pub augment: Option<AugmentConfig>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 20, batch_size: 64, lr: 1e-3, augment: None, seed: 0 }
    }
}

/// The four trained configurations: the CNN with and without augmentation, the
/// MLP and the LSTM network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recipe {
    #[serde(rename = "cnn-aug")]
    CnnAug,
    #[serde(rename = "cnn")]
    Cnn,
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "rnn")]
    Rnn,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [Recipe::CnnAug, Recipe::Cnn, Recipe::Mlp, Recipe::Rnn];

    pub fn name(self) -> &'static str {
        match self {
            Self::CnnAug => "cnn-aug",
            Self::Cnn => "cnn",
            Self::Mlp => "mlp",
            Self::Rnn => "rnn",
        }
    }

    pub fn model(self) -> ModelId {
        match self {
            Self::CnnAug | Self::Cnn => ModelId::Cnn,
            Self::Mlp => ModelId::Mlp,
            Self::Rnn => ModelId::Rnn,
        }
    }

    pub fn spec(self) -> ModelSpec {
        ModelSpec::preset(self.model())
    }

    /// Default training configuration: batch 64 for the CNNs, 32 otherwise,
    /// Adam at 1e-3, 20 epochs.
    pub fn config(self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: if self.model() == ModelId::Cnn { 64 } else { 32 },
            augment: (self == Self::CnnAug).then(|| AugmentConfig { seed, ..Default::default() }),
            seed,
            ..Default::default()
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = NnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| NnError::InvalidSpec(format!("unknown model {s:?}, expected cnn-aug, cnn, mlp or rnn")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Running averages over the epoch's (possibly augmented) training batches.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

impl EpochMetrics {
    pub fn gap(&self) -> f64 {
        self.train_acc - self.val_acc
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub name: String,
    pub config: TrainConfig,
    pub train_samples: usize,
    pub final_metrics: Option<EpochMetrics>,
}

/// A trained classifier: architecture, weights and how it was trained.
/// Immutable once built; share it behind an `Arc`.
pub struct ModelBundle {
    pub network: Network<f32>,
    pub metadata: TrainingMetadata,
}

impl fmt::Debug for ModelBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelBundle").field("spec", self.network.spec()).field("metadata", &self.metadata).finish()
    }
}

/// 10×10 counts, rows are true classes, columns predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; 10]; 10]);

impl ConfusionMatrix {
    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.0[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [u64; 10] {
        self.0.map(|r| r.iter().sum())
    }

    pub fn trace(&self) -> u64 {
        (0..10).map(|i| self.0[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub digit: u8,
    pub confidence: f64,
    pub probabilities: [f64; 10],
}

fn labels_of(images: &[DigitImage]) -> Result<Vec<usize>, NnError> {
    images
        .iter()
        .enumerate()
        .map(|(i, img)| img.label().map(usize::from).ok_or_else(|| NnError::InvalidData(format!("image {i} has no label"))))
        .collect()
}

/// Stacks images into a `[N, 1, 28, 28]` batch.
pub fn images_to_batch<'a>(images: impl IntoIterator<Item = &'a DigitImage>) -> Tensor<f32> {
    let mut data = Vec::new();
    for img in images {
        data.extend_from_slice(img.pixels());
    }
    let n = data.len() / IMAGE_PIXELS;
    Tensor::new(vec![n, 1, IMAGE_SIDE, IMAGE_SIDE], data).expect("whole images")
}

/// Trains a fresh network. `on_epoch` sees each epoch's metrics as they are produced.
pub fn train(
    spec: ModelSpec,
    train_set: &[DigitImage],
    val_set: &[DigitImage],
    cfg: &TrainConfig,
    name: &str,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(ModelBundle, TrainReport), NnError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NnError::InvalidData("training and validation sets must be non-empty".into()));
    }
    if cfg.batch_size == 0 || !(cfg.lr >= 0.0) {
        return Err(NnError::InvalidData("batch size must be positive and lr non-negative".into()));
    }
    if let Some(aug) = &cfg.augment {
        aug.validate().map_err(NnError::InvalidData)?;
    }
    let labels = labels_of(train_set)?;
    labels_of(val_set)?;

    let started = Instant::now();
    let mut net = Network::<f32>::new(spec, cfg.seed)?;
    let mut adam = AdamState::new(AdamConfig { lr: cfg.lr, ..Default::default() });
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut aug_rng = ChaCha8Rng::seed_from_u64(cfg.augment.as_ref().map_or(0, |a| a.seed) ^ cfg.seed);
    aug_rng.set_stream(2);

    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<DigitImage> = match &cfg.augment {
                Some(aug) => chunk.iter().map(|&i| augment(&train_set[i], aug, &mut aug_rng)).collect(),
                None => chunk.iter().map(|&i| train_set[i].clone()).collect(),
            };
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let logits = net.forward(&images_to_batch(&batch))?;
            let out = softmax_cross_entropy(&logits, &y)?;
            if !out.loss.is_finite() {
                report.wall_time_s = started.elapsed().as_secs_f64();
                return Err(NnError::DivergenceDetected { epoch, report: Box::new(report) });
            }
            loss_sum += out.loss as f64 * chunk.len() as f64;
            correct += out.correct;
            net.zero_grad();
            net.backward(&out.grad)?;
            adam.step(net.param_grads().into_iter().map(|(p, g)| (p, &*g)))?;
        }
        let val = evaluate_network(&net, val_set)?;
        let n = train_set.len() as f64;
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss: val.loss,
            val_acc: val.accuracy,
        };
        if !m.val_loss.is_finite() {
            report.epochs.push(m);
            report.wall_time_s = started.elapsed().as_secs_f64();
            return Err(NnError::DivergenceDetected { epoch, report: Box::new(report) });
        }
        on_epoch(&m);
        report.epochs.push(m);
    }
    report.wall_time_s = started.elapsed().as_secs_f64();
    let bundle = ModelBundle {
        network: net,
        metadata: TrainingMetadata {
            name: name.to_string(),
            config: cfg.clone(),
            train_samples: train_set.len(),
            final_metrics: report.last().copied(),
        },
    };
    Ok((bundle, report))
}

/// Mean cross-entropy, accuracy and confusion matrix in evaluation mode.
pub fn evaluate_network(net: &Network<f32>, images: &[DigitImage]) -> Result<Evaluation, NnError> {
    let labels = labels_of(images)?;
    let mut confusion = ConfusionMatrix::default();
    let mut loss_sum = 0.0;
    for (chunk, y) in images.chunks(EVAL_BATCH).zip(labels.chunks(EVAL_BATCH)) {
        let logits = net.infer(&images_to_batch(chunk))?.cast::<f64>();
        let out = softmax_cross_entropy(&logits, y)?;
        loss_sum += out.loss * y.len() as f64;
        for (row, &truth) in logits.data().chunks_exact(10).zip(y) {
            confusion.record(truth, argmax(row));
        }
    }
    let n = images.len().max(1) as f64;
    Ok(Evaluation { loss: loss_sum / n, accuracy: confusion.accuracy(), confusion })
}

impl ModelBundle {
    pub fn new(network: Network<f32>, metadata: TrainingMetadata) -> Self {
        Self { network, metadata }
    }

    /// An untrained network with default metadata, mostly for plumbing and tests.
    pub fn untrained(recipe: Recipe, seed: u64) -> Result<Self, NnError> {
        let cfg = TrainConfig { epochs: 0, ..recipe.config(seed) };
        Ok(Self {
            network: Network::new(recipe.spec(), seed)?,
            metadata: TrainingMetadata { name: recipe.name().into(), config: cfg, train_samples: 0, final_metrics: None },
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.network.spec()
    }

    pub fn evaluate(&self, images: &[DigitImage]) -> Result<Evaluation, NnError> {
        evaluate_network(&self.network, images)
    }

    pub fn predict(&self, image: &DigitImage) -> Result<Prediction, NnError> {
        Ok(self.predict_batch(std::slice::from_ref(image))?.remove(0))
    }

    /// Class probabilities for each image. Ties go to the lower digit.
    pub fn predict_batch(&self, images: &[DigitImage]) -> Result<Vec<Prediction>, NnError> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(EVAL_BATCH) {
            let logits = self.network.infer(&images_to_batch(chunk))?;
            if logits.shape()[1] != 10 {
                return Err(NnError::ShapeMismatch(format!("model outputs {:?}, expected 10 classes", logits.shape())));
            }
            for row in logits.data().chunks_exact(10) {
                out.push(prediction_from_logits(row));
            }
        }
        Ok(out)
    }
}

pub fn prediction_from_logits(logits: &[f32]) -> Prediction {
    let l64: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
    let p = softmax(&l64);
    let digit = argmax(&p);
    let mut probabilities = [0.0; 10];
    probabilities.copy_from_slice(&p[..10]);
    Prediction { digit: digit as u8, confidence: p[digit], probabilities }
}
