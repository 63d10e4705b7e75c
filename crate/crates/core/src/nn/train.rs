//! Seeded mini-batch training loop.

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::model::{cross_entropy, FeatureStats, Mode, Model, ModelKind};
use crate::error::{Error, Result};
use crate::numeric::argmax;
use crate::pipeline::{one_hot, WindowSet};
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss over the epoch (dropout active).
    pub loss: f64,
    pub train_accuracy: f64,
    /// Held-out accuracy after the epoch, when an evaluation set is given.
    pub eval_accuracy: Option<f64>,
}

/// Fresh model whose input statistics come from `train_set`.
pub fn init_model(kind: ModelKind, train_set: &WindowSet, n_animals: usize, n_classes: usize, cfg: &TrainConfig) -> Result<Model> {
    if train_set.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    let stats = FeatureStats::from_rows(train_set.dim(), train_set.rows())?;
    Model::new(kind, train_set.spec(), n_animals, stats, n_classes, cfg)
}

pub fn train(model: Model, train_set: &WindowSet, cfg: &TrainConfig) -> Result<(Model, Vec<EpochLog>)> {
    train_with_eval(model, train_set, cfg, None, |_| {})
}

/// Train for `cfg.epochs` epochs. Each epoch shuffles the windows, averages
/// gradients over mini-batches of `cfg.batch_size` (the last batch may be
/// short) and takes one Adam step per batch. `on_epoch` sees each log entry
/// as it is produced.
pub fn train_with_eval(
    mut model: Model,
    train_set: &WindowSet,
    cfg: &TrainConfig,
    eval_set: Option<&WindowSet>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(Model, Vec<EpochLog>)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    if train_set.dim() != model.input_dim() {
        return Err(Error::shape("train", format!("dataset feature dim {}", train_set.dim()), format!("model input dim {}", model.input_dim())));
    }
    let k = model.n_classes;
    let targets: Vec<Vec<f64>> = train_set
        .iter()
        .map(|w| one_hot(w.target.index(), k))
        .collect::<Result<_>>()?;

    let mut shuffle_rng = Rng::new(derive_seed(cfg.seed, 1));
    let dropout_seed = derive_seed(cfg.seed, 2);
    let mut draws = 0u64;
    let mut adam = AdamState::new(&model.net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = model.net.zeros_like();
            let prepared = model.prepare();
            for &i in batch {
                let window = train_set.get(i);
                let mut rng = Rng::new(derive_seed(dropout_seed, draws));
                draws += 1;
                let (probs, cache) = prepared.forward(
                    &window,
                    Mode::Training {
                        dropout_rate: cfg.dropout_rate,
                        rng: &mut rng,
                    },
                )?;
                loss_sum += cross_entropy(&probs, &targets[i])?;
                if argmax(&probs) == window.target.index() {
                    correct += 1;
                }
                model.backward_into(&cache, &targets[i], &mut acc)?;
            }
            let scale = 1.0 / batch.len() as f64;
            for t in acc.tensors_mut() {
                for g in t.iter_mut() {
                    *g *= scale;
                }
            }
            adam_step(&mut model.net, &acc, &mut adam, cfg)?;
        }
        let n = train_set.len() as f64;
        let eval_accuracy = match eval_set {
            Some(set) => Some(accuracy(&model, set)?),
            None => None,
        };
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            eval_accuracy,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok((model, log))
}

/// Fraction of windows whose prediction matches the target.
pub fn accuracy(model: &Model, set: &WindowSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::contract("accuracy over an empty set"));
    }
    let preds = model.prepare().predict_set(set)?;
    let correct = preds.iter().zip(set.iter()).filter(|((p, _), w)| *p == w.target.index()).count();
    Ok(correct as f64 / set.len() as f64)
}

/// Epoch log as CSV.
pub fn format_epoch_log(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,loss,train_accuracy,eval_accuracy\n");
    for e in log {
        let eval = e.eval_accuracy.map(|a| a.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", e.epoch, e.loss, e.train_accuracy, eval));
    }
    s
}
