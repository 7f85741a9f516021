use super::normalize::Normalizer;
use super::optim::Adam;
use super::schedule::PlateauScheduler;
use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::geometry::FrameRecord;
use crate::model::{FusedModel, ModelInput, ParameterStore};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    /// Loss must drop by more than this to count as an improvement.
    pub min_delta: f64,
    pub l2_lambda: f64,
    /// Drives batch shuffling and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 1e-5,
            epochs: 100,
            batch_size: 16,
            plateau_patience: 5,
            plateau_factor: 0.5,
            min_lr: 1e-7,
            min_delta: 1e-4,
            l2_lambda: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::usage(format!("initial_lr {} must be positive", self.initial_lr)));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::usage(format!(
                "plateau_factor {} outside (0, 1)",
                self.plateau_factor
            )));
        }
        if !(self.min_lr.is_finite() && self.min_lr >= 0.0 && self.min_lr <= self.initial_lr) {
            return Err(Error::usage(format!(
                "min_lr {} must lie in [0, initial_lr]",
                self.min_lr
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::usage("batch_size must be at least 2 for batch normalization"));
        }
        if self.epochs == 0 {
            return Err(Error::usage("epochs must be at least 1"));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) || self.min_delta.is_nan() || self.min_delta < 0.0 {
            return Err(Error::usage("l2_lambda and min_delta must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean over batches of data loss plus L2 penalty, train mode.
    pub train_loss: f64,
    /// Eval-mode mean squared error on the test split, normalized targets.
    pub test_loss: f64,
    /// Rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub epochs: Vec<EpochStats>,
}

impl LossTrace {
    /// Rows `epoch,train_loss,test_loss,lr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,test_loss,lr\n");
        for e in &self.epochs {
            writeln!(s, "{},{},{},{}", e.epoch, e.train_loss, e.test_loss, e.lr).unwrap();
        }
        s
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Normalized targets of `records`; every record must carry targets.
pub fn normalized_targets(records: &[&FrameRecord], normalizer: &Normalizer) -> Result<Vec<[f64; 3]>> {
    records
        .iter()
        .map(|r| {
            r.targets
                .map(|t| normalizer.apply(t))
                .ok_or_else(|| Error::data(format!("record {}: no targets", r.id)))
        })
        .collect()
}

/// Eval-mode mean squared error against normalized targets.
pub fn eval_mse(model: &FusedModel, inputs: &[ModelInput], targets: &[[f64; 3]]) -> Result<f64> {
    let rows = model.predict_rows(inputs)?;
    let s: f64 = rows
        .iter()
        .zip(targets)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok(s / (3 * rows.len()) as f64)
}

/// Batches of `size` over `order`; a trailing single record joins the
/// previous batch so batch statistics stay defined.
pub(crate) fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = (start + size).min(order.len());
        if order.len() - end == 1 {
            end = order.len();
        }
        out.push(&order[start..end]);
        start = end;
    }
    out
}

/// Epoch-by-epoch optimizer state. Keeps the parameters of the epoch with
/// the lowest test loss.
pub struct Trainer<'a> {
    model: FusedModel,
    cfg: TrainConfig,
    train: Vec<ModelInput<'a>>,
    train_targets: Vec<[f64; 3]>,
    test: Vec<ModelInput<'a>>,
    test_targets: Vec<[f64; 3]>,
    adam: Adam,
    scheduler: PlateauScheduler,
    rng: ChaCha8Rng,
    best: Option<(f64, ParameterStore)>,
    trace: LossTrace,
}

impl<'a> Trainer<'a> {
    pub fn new(
        model: FusedModel,
        normalizer: &Normalizer,
        train: &[&'a FrameRecord],
        test: &[&'a FrameRecord],
        cfg: &TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.len() < 2 || test.is_empty() {
            return Err(Error::data(format!(
                "need at least 2 training and 1 test record, got {} and {}",
                train.len(),
                test.len()
            )));
        }
        let adam = Adam::new(&model.store);
        Ok(Trainer {
            train_targets: normalized_targets(train, normalizer)?,
            test_targets: normalized_targets(test, normalizer)?,
            train: train.iter().map(|r| ModelInput::from(*r)).collect(),
            test: test.iter().map(|r| ModelInput::from(*r)).collect(),
            model,
            adam,
            scheduler: PlateauScheduler::new(
                cfg.initial_lr,
                cfg.plateau_patience,
                cfg.plateau_factor,
                cfg.min_lr,
                cfg.min_delta,
            ),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg: cfg.clone(),
            best: None,
            trace: LossTrace::default(),
        })
    }

    pub fn model(&self) -> &FusedModel {
        &self.model
    }

    pub fn trace(&self) -> &LossTrace {
        &self.trace
    }

    fn step(&mut self, batch: &[usize], epoch: usize, index: usize, lr: f64) -> Result<f64> {
        let inputs: Vec<ModelInput> = batch.iter().map(|&i| self.train[i]).collect();
        let target: Vec<f64> = batch.iter().flat_map(|&i| self.train_targets[i]).collect();
        let mut tape = Tape::new();
        let graph = self.model.forward_train(&mut tape, &inputs, &mut self.rng)?;
        let target = tape.leaf(Tensor::new(vec![batch.len(), 3], target)?, false);
        let data = tape.mse_loss(graph.output, target)?;
        let penalty = tape.l2_penalty(&graph.decayed, self.cfg.l2_lambda)?;
        let loss = tape.add(data, penalty)?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite loss {value} at epoch {epoch}, batch {index}"
            )));
        }
        tape.backward(loss)?;
        self.adam.step(&mut self.model.store, lr, tape.param_grads());
        Ok(value)
    }

    /// Shuffles, runs every minibatch, scores the test split and updates
    /// the learning rate.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let epoch = self.trace.len() + 1;
        let lr = self.scheduler.lr();
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let groups = batches(&order, self.cfg.batch_size);
        for (b, batch) in groups.iter().enumerate() {
            total += self.step(batch, epoch, b + 1, lr)?;
        }
        let test_loss = eval_mse(&self.model, &self.test, &self.test_targets)?;
        if !test_loss.is_finite() {
            return Err(Error::numeric(format!("non-finite test loss at epoch {epoch}")));
        }
        if self.best.as_ref().is_none_or(|(b, _)| test_loss < *b) {
            match &mut self.best {
                Some((b, store)) => {
                    *b = test_loss;
                    store.copy_values_from(&self.model.store)?;
                }
                None => self.best = Some((test_loss, self.model.store.clone())),
            }
        }
        self.scheduler.step(test_loss);
        let stats = EpochStats {
            epoch,
            train_loss: total / groups.len() as f64,
            test_loss,
            lr,
        };
        self.trace.epochs.push(stats);
        Ok(stats)
    }

    /// The model with its best-epoch parameters, and the loss trace.
    pub fn finish(mut self) -> Result<(FusedModel, LossTrace)> {
        if let Some((_, store)) = &self.best {
            self.model.store.copy_values_from(store)?;
        }
        Ok((self.model, self.trace))
    }
}

/// Runs `cfg.epochs` epochs and returns the best-test-loss model.
pub fn train(
    model: FusedModel,
    normalizer: &Normalizer,
    train: &[&FrameRecord],
    test: &[&FrameRecord],
    cfg: &TrainConfig,
) -> Result<(FusedModel, LossTrace)> {
    let mut t = Trainer::new(model, normalizer, train, test, cfg)?;
    for _ in 0..cfg.epochs {
        t.run_epoch()?;
    }
    t.finish()
}
