use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelInputs};
use crate::attention::AttentionConfig;
use crate::error::{Error, Result};
use crate::graph::SplitAssignment;
use crate::numkit::{Matrix, Optimizer, Tape};
use crate::scalar::Scalar;

/// One line of the training log. Accuracies are measured after the epoch's
/// update, in eval mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub dev_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Snapshot with the best dev accuracy.
    pub model: Model<T>,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    /// Eval-mode logits of the best snapshot.
    pub logits: Matrix<T>,
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows<T: Scalar>(logits: &Matrix<T>) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `nodes` whose prediction equals the label.
pub fn accuracy(predictions: &[usize], labels: &[usize], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Validation("accuracy over an empty node set".into()));
    }
    let hits = nodes
        .iter()
        .filter(|&&i| predictions[i] == labels[i])
        .count();
    Ok(hits as f64 / nodes.len() as f64)
}

/// Accuracy of argmax predictions from `logits` on `nodes`.
pub fn evaluate<T: Scalar>(logits: &Matrix<T>, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    accuracy(&argmax_rows(logits), labels, nodes)
}

/// Full-batch training with dev-based model selection.
///
/// After every epoch the updated parameters are scored on the dev set; the
/// snapshot with the strictly best dev accuracy is kept and training stops
/// once `patience` epochs pass without improvement or at `max_epochs`.
pub fn train_model<T: Scalar>(
    inputs: &ModelInputs<T>,
    labels: &[usize],
    num_classes: usize,
    split: &SplitAssignment,
    config: &ModelConfig,
    attention: &AttentionConfig,
) -> Result<TrainOutcome<T>> {
    split.validate(inputs.num_nodes())?;
    if labels.len() != inputs.num_nodes() {
        return Err(Error::shape(format!(
            "{} labels for {} nodes",
            labels.len(),
            inputs.num_nodes()
        )));
    }
    if split.train.is_empty() || split.dev.is_empty() {
        return Err(Error::Validation("train and dev sets must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::new(config, attention, inputs, num_classes, &mut rng)?;
    let mut optimizer = Optimizer::<T>::new(config.optimizer, config.learning_rate);

    let mut log = Vec::new();
    let mut best: Option<(Model<T>, Matrix<T>, usize, f64)> = None;
    let mut since_best = 0usize;
    let mut pending_loss: Option<f64> = None;

    // The dev evaluation of epoch e runs at the top of epoch e + 1, reusing
    // that pass's attention output: attention has no dropout, so the values
    // are exactly what an eval-mode forward would compute.
    let mut stopped = false;
    for epoch in 0..config.max_epochs {
        let mut tape = Tape::new();
        let (g_in, kg_in, attn_params) = model.record_embedding_inputs(&mut tape, inputs)?;
        if let Some(loss) = pending_loss.take() {
            let g = g_in.map(|v| tape.value(v).clone());
            let kg = kg_in.map(|v| tape.value(v).clone());
            let logits = eval_logits(&model, inputs, g, kg)?;
            if record(&mut log, &mut best, &mut since_best, &model, logits, epoch - 1, loss, labels, split, config)? {
                stopped = true;
                break;
            }
        }
        let pass = model.forward_with(&mut tape, inputs, g_in, kg_in, attn_params, true, &mut rng)?;
        let loss_var = tape.nll_loss(pass.logits, labels, &split.train)?;
        tape.backward(loss_var)?;
        {
            let mut params = model.parameters_mut();
            for (v, p) in pass.params.iter().zip(params.iter_mut()) {
                tape.accumulate_into(*v, p)?;
            }
            optimizer.step(&mut params)?;
        }
        pending_loss = Some(tape.value(loss_var).get(0, 0).to_f64_lossy());
    }
    if !stopped {
        if let Some(loss) = pending_loss {
            let logits = model.predict(inputs)?;
            let last = config.max_epochs - 1;
            record(&mut log, &mut best, &mut since_best, &model, logits, last, loss, labels, split, config)?;
        }
    }

    let (model, logits, best_epoch, dev_accuracy) = match best {
        Some(b) => b,
        None => {
            // max_epochs = 0: the initialization is the only candidate.
            let logits = model.predict(inputs)?;
            let dev = evaluate(&logits, labels, &split.dev)?;
            (model, logits, 0, dev)
        }
    };
    let test_accuracy = if split.test.is_empty() {
        f64::NAN
    } else {
        evaluate(&logits, labels, &split.test)?
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        dev_accuracy,
        test_accuracy,
        logits,
    })
}

fn eval_logits<T: Scalar>(
    model: &Model<T>,
    inputs: &ModelInputs<T>,
    g: Option<Matrix<T>>,
    kg: Option<Matrix<T>>,
) -> Result<Matrix<T>> {
    let mut tape = Tape::new();
    let g = g.map(|m| tape.constant(m));
    let kg = kg.map(|m| tape.constant(m));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pass = model.forward_with(&mut tape, inputs, g, kg, Vec::new(), false, &mut rng)?;
    Ok(tape.value(pass.logits).clone())
}

/// Appends a log line and updates the best snapshot. Returns whether to stop.
#[allow(clippy::too_many_arguments)]
fn record<T: Scalar>(
    log: &mut Vec<EpochRecord>,
    best: &mut Option<(Model<T>, Matrix<T>, usize, f64)>,
    since_best: &mut usize,
    model: &Model<T>,
    logits: Matrix<T>,
    epoch: usize,
    loss: f64,
    labels: &[usize],
    split: &SplitAssignment,
    config: &ModelConfig,
) -> Result<bool> {
    let pred = argmax_rows(&logits);
    let train_acc = accuracy(&pred, labels, &split.train)?;
    let dev_acc = accuracy(&pred, labels, &split.dev)?;
    log::debug!("epoch {epoch}: loss {loss:.4} train {train_acc:.4} dev {dev_acc:.4}");
    log.push(EpochRecord {
        epoch,
        loss,
        train_acc,
        dev_acc,
    });
    if best.as_ref().is_none_or(|b| dev_acc > b.3) {
        *best = Some((model.clone(), logits, epoch, dev_acc));
        *since_best = 0;
    } else {
        *since_best += 1;
    }
    Ok(*since_best >= config.patience)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        let l = Matrix::<f64>::from_rows(&[&[1.0, 1.0, 0.0], &[0.0, 2.0, 2.0]]).unwrap();
        assert_eq!(argmax_rows(&l), vec![0, 1]);
    }

    #[test]
    fn accuracy_cases() {
        let labels = [0, 1, 2, 3];
        assert_eq!(accuracy(&[0, 1, 2, 3], &labels, &[0, 1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2, 3, 0], &labels, &[0, 1, 2, 3]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 2, 0], &labels, &[0, 1, 2, 3]).unwrap(), 0.75);
        assert!(accuracy(&[0], &labels, &[]).is_err());
    }
}
