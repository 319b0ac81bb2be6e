use serde::{Deserialize, Serialize};

use super::{cross_entropy, GruError, GruModel, Real, WindowSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Accuracy, loss and confusion matrix over a window set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: u64,
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
}

impl Evaluation {
    /// Share of windows from other classes predicted as `class`.
    pub fn false_positive_rate(&self, class: usize) -> f64 {
        let (mut fp, mut negatives) = (0u64, 0u64);
        for (t, row) in self.confusion.iter().enumerate() {
            if t != class {
                negatives += row.iter().sum::<u64>();
                fp += row[class];
            }
        }
        if negatives == 0 {
            0.0
        } else {
            fp as f64 / negatives as f64
        }
    }
}

pub fn evaluate<T: Real>(model: &GruModel<T>, data: &dyn WindowSource, batch_size: usize) -> Result<Evaluation, GruError> {
    let k = model.num_classes();
    let mut confusion = vec![vec![0u64; k]; k];
    let mut loss = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let windows: Vec<&[f32]> = chunk.iter().map(|&i| data.window(i)).collect();
        let x = model.batch_input(&windows)?;
        let (probs, _) = model.forward_batch(x.view())?;
        for (row, &i) in probs.rows().into_iter().zip(chunk) {
            let y = data.label(i);
            if y >= k {
                return Err(GruError::BadLabel { label: y, classes: k });
            }
            let row = row.to_vec();
            loss += cross_entropy(&row, y)?.to_f64().unwrap();
            let pred = row
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0;
            confusion[y][pred] += 1;
        }
    }
    let n = data.len() as u64;
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: u64 = confusion[c].iter().sum();
            let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: model.spec.class_names[c].clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    Ok(Evaluation {
        samples: n,
        accuracy: ratio(correct, n),
        loss: if n == 0 { 0.0 } else { loss / n as f64 },
        confusion,
        per_class,
    })
}
