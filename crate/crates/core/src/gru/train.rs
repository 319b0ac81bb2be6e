use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, evaluate, AdamState, GruError, GruModel, Real};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Global L2 norm the gradient is clipped to.
    pub grad_clip: Option<f64>,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: Option<usize>,
    /// Skip the every-class-present check (overfitting sanity runs).
    pub allow_missing_classes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 512,
            epochs: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            grad_clip: None,
            patience: Some(20),
            allow_missing_classes: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GruError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.batch_size >= 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.grad_clip.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(GruError::InvalidConfig(format!("bad training config {self:?}")))
        }
    }
}

/// Labeled windows addressable by index. Each window is `time_steps x
/// input_dim` values, row-major by step.
pub trait WindowSource: Sync {
    fn len(&self) -> usize;
    fn label(&self, index: usize) -> usize;
    fn window(&self, index: usize) -> &[f32];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-memory windows of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSet {
    pub window_len: usize,
    pub data: Vec<f32>,
    pub labels: Vec<usize>,
}

impl WindowSet {
    pub fn new(window_len: usize) -> Self {
        Self {
            window_len,
            data: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, window: &[f32], label: usize) {
        assert_eq!(window.len(), self.window_len, "window length");
        self.data.extend_from_slice(window);
        self.labels.push(label);
    }
}

impl WindowSource for WindowSet {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    fn window(&self, index: usize) -> &[f32] {
        &self.data[index * self.window_len..(index + 1) * self.window_len]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept, when a validation set was given.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Mini-batch Adam on mean cross-entropy. Batches are reshuffled every
/// epoch from `config.seed`, so a fixed seed gives bit-identical results.
/// With a validation set the parameters of the lowest validation loss are
/// kept and training stops once `patience` epochs pass without improvement.
pub fn train<T: Real>(
    model: &mut GruModel<T>,
    data: &dyn WindowSource,
    validation: Option<&dyn WindowSource>,
    config: &TrainConfig,
) -> Result<TrainHistory, GruError> {
    config.validate()?;
    model.check_shapes()?;
    if data.is_empty() {
        return Err(GruError::EmptyDataset);
    }
    let classes = model.num_classes();
    let mut counts = vec![0usize; classes];
    for i in 0..data.len() {
        let y = data.label(i);
        if y >= classes {
            return Err(GruError::BadLabel { label: y, classes });
        }
        counts[y] += 1;
    }
    if !config.allow_missing_classes {
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(GruError::ClassMissing(model.spec.class_names[c].clone()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut state = AdamState::new(&model.params);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, super::Params<T>)> = None;
    let mut windows: Vec<&[f32]> = Vec::with_capacity(config.batch_size);
    let mut labels = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            windows.clear();
            labels.clear();
            for &i in chunk {
                windows.push(data.window(i));
                labels.push(data.label(i));
            }
            let x = model.batch_input(&windows)?;
            let (probs, cache) = model.forward_batch(x.view())?;
            let (grads, loss) = model.backward(&cache, &labels)?;
            loss_sum += loss.to_f64().unwrap() * chunk.len() as f64;
            for (row, &y) in probs.rows().into_iter().zip(&labels) {
                let pred = row
                    .iter()
                    .enumerate()
                    .fold((0, T::neg_infinity()), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                    .0;
                correct += usize::from(pred == y);
            }
            adam_step(&mut model.params, &grads, &mut state, config);
        }
        let n = data.len() as f64;
        let mut m = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss: None,
            val_accuracy: None,
        };
        if let Some(val) = validation.filter(|v| !v.is_empty()) {
            let e = evaluate(model, val, config.batch_size)?;
            m.val_loss = Some(e.loss);
            m.val_accuracy = Some(e.accuracy);
            if best.as_ref().is_none_or(|b| e.loss < b.0) {
                best = Some((e.loss, epoch, model.params.clone()));
            }
        }
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.3} val_loss {:?} val_acc {:?}",
            m.train_loss,
            m.train_accuracy,
            m.val_loss,
            m.val_accuracy
        );
        history.epochs.push(m);
        if let (Some(p), Some((_, be, _))) = (config.patience, &best) {
            if epoch - be >= p {
                history.stopped_early = epoch + 1 < config.epochs;
                break;
            }
        }
    }
    if let Some((_, epoch, params)) = best {
        model.params = params;
        history.best_epoch = Some(epoch);
    }
    Ok(history)
}
