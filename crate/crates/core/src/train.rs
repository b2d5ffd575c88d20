//! Training protocol: random 80/10/10 split, minibatch epochs, early
//! stopping on validation ROC-AUC and step-wise learning-rate reduction.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::roc_auc;
use crate::model::{Grads, Model, ModelError, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dataset has {0} rows; at least 10 are needed to split")]
    TooSmall(usize),
    #[error("empty training split")]
    EmptyTrain,
    #[error("parameter/gradient shape mismatch in tensor {tensor}")]
    Shape { tensor: usize },
    #[error("non-finite gradient in tensor {tensor}")]
    NonFiniteGradient { tensor: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Optimizer {
    pub fn adam() -> Optimizer {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// `None` disables early stopping.
    pub es_patience: Option<usize>,
    /// `None` disables learning-rate reduction.
    pub lr_patience: Option<usize>,
    pub lr_factor: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 30,
            es_patience: Some(10),
            lr_patience: Some(5),
            lr_factor: 0.5,
            lr: 1e-3,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.max_epochs == 0 || self.batch_size == 0 {
            return bad("max_epochs and batch_size must be positive");
        }
        if self.es_patience == Some(0) || self.lr_patience == Some(0) {
            return bad("patience must be at least 1");
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return bad("lr_factor must lie in (0, 1)");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return bad("Adam needs betas in [0, 1) and eps > 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> SplitSpec {
        SplitSpec {
            fractions: [0.8, 0.1, 0.1],
            seed,
        }
    }
}

/// Row indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random partition of `0..n`. Validation and test get the floor of
/// their share; the remainder goes to training.
pub fn split_random(n: usize, spec: &SplitSpec) -> Result<Split, TrainError> {
    if n < 10 {
        return Err(TrainError::TooSmall(n));
    }
    let [ft, fv, fs] = spec.fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || ((ft + fv + fs) - 1.0).abs() > 1e-9
    {
        return Err(TrainError::Config("split fractions must sum to 1".into()));
    }
    // The epsilon keeps 100 * 0.1 from flooring to 9.
    let n_val = (n as f64 * fv + 1e-9).floor() as usize;
    let n_test = (n as f64 * fs + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = idx.split_off(n - n_test);
    let val = idx.split_off(idx.len() - n_val);
    Ok(Split {
        train: idx,
        val,
        test,
    })
}

/// What the schedule decided after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochDecision {
    pub improved: bool,
    pub lr_dropped: bool,
    pub stop: bool,
}

/// Counter state of the early-stopping and learning-rate schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub best_val: f64,
    pub best_epoch: usize,
    pub epochs_since_improve: usize,
    pub epochs_since_lr_drop: usize,
    pub current_lr: f64,
    max_epochs: usize,
    es_patience: Option<usize>,
    lr_patience: Option<usize>,
    lr_factor: f64,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> TrainState {
        TrainState {
            epoch: 0,
            best_val: f64::NEG_INFINITY,
            best_epoch: 0,
            epochs_since_improve: 0,
            epochs_since_lr_drop: 0,
            current_lr: cfg.lr,
            max_epochs: cfg.max_epochs,
            es_patience: cfg.es_patience,
            lr_patience: cfg.lr_patience,
            lr_factor: cfg.lr_factor,
        }
    }

    /// Records the validation score of the epoch just finished. Only a
    /// strictly greater score counts as improvement; NaN never does.
    pub fn observe(&mut self, score: f64) -> EpochDecision {
        self.epoch += 1;
        let improved = score > self.best_val;
        let mut lr_dropped = false;
        if improved {
            self.best_val = score;
            self.best_epoch = self.epoch;
            self.epochs_since_improve = 0;
            self.epochs_since_lr_drop = 0;
        } else {
            self.epochs_since_improve += 1;
            self.epochs_since_lr_drop += 1;
            if self
                .lr_patience
                .is_some_and(|p| self.epochs_since_lr_drop >= p)
            {
                self.current_lr *= self.lr_factor;
                self.epochs_since_lr_drop = 0;
                lr_dropped = true;
            }
        }
        let stop = self.epoch >= self.max_epochs
            || self
                .es_patience
                .is_some_and(|p| self.epochs_since_improve >= p);
        EpochDecision {
            improved,
            lr_dropped,
            stop,
        }
    }
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Grads,
    pub v: Grads,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> AdamState {
        let zeros: Grads = params.iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

fn check_grads(params: &[Tensor], grads: &[Vec<f64>]) -> Result<(), TrainError> {
    if params.len() != grads.len() {
        return Err(TrainError::Shape {
            tensor: params.len().min(grads.len()),
        });
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(TrainError::Shape { tensor: k });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::NonFiniteGradient { tensor: k });
        }
    }
    Ok(())
}

/// Bias-corrected Adam update. Parameters are untouched on error.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<(), TrainError> {
    check_grads(params, grads)?;
    if state.m.len() != params.len()
        || state
            .m
            .iter()
            .zip(params.iter())
            .any(|(m, p)| m.len() != p.len())
    {
        return Err(TrainError::Shape { tensor: 0 });
    }
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for (k, p) in params.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[k], &mut state.v[k], &grads[k]);
        for i in 0..p.data.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let step = (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            p.data[i] -= lr * step;
        }
    }
    Ok(())
}

pub fn sgd_step(params: &mut [Tensor], grads: &[Vec<f64>], lr: f64) -> Result<(), TrainError> {
    check_grads(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (x, d) in p.data.iter_mut().zip(g) {
            *x -= lr * d;
        }
    }
    Ok(())
}

enum OptState {
    Adam(AdamState, f64, f64, f64),
    Sgd,
}

impl OptState {
    fn new(opt: Optimizer, params: &[Tensor]) -> OptState {
        match opt {
            Optimizer::Adam { beta1, beta2, eps } => {
                OptState::Adam(AdamState::new(params), beta1, beta2, eps)
            }
            Optimizer::Sgd => OptState::Sgd,
        }
    }

    fn step(
        &mut self,
        params: &mut [Tensor],
        grads: &[Vec<f64>],
        lr: f64,
    ) -> Result<(), TrainError> {
        match self {
            OptState::Adam(s, b1, b2, eps) => adam_step(params, grads, s, lr, *b1, *b2, *eps),
            OptState::Sgd => sgd_step(params, grads, lr),
        }
    }
}

/// One token sequence with its binary targets (one per model output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean validation ROC-AUC over outputs; `None` when undefined.
    pub val_auc: Option<f64>,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Model,
    pub best_epoch: usize,
    pub best_val: f64,
    pub history: Vec<EpochRecord>,
}

/// Mean loss, per-output probabilities, and mean ROC-AUC over the outputs
/// whose labels contain both classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub probs: Vec<Vec<f64>>,
    pub auc: Option<f64>,
}

pub fn evaluate(model: &Model, data: &[Example]) -> Result<Evaluation, TrainError> {
    let probs: Vec<Vec<f64>> = data
        .par_iter()
        .map(|ex| model.predict(&ex.tokens))
        .collect::<Result<_, _>>()?;
    let mut loss = 0.0;
    for (p, ex) in probs.iter().zip(data) {
        if p.len() != ex.labels.len() {
            return Err(ModelError::LabelCount {
                expected: p.len(),
                got: ex.labels.len(),
            }
            .into());
        }
        loss += p
            .iter()
            .zip(&ex.labels)
            .map(|(&p, &y)| crate::model::bce_loss(p, y))
            .sum::<f64>();
    }
    let n_out = model.config().n_outputs;
    let mut aucs = Vec::new();
    for k in 0..n_out {
        let scores: Vec<f64> = probs.iter().map(|p| p[k]).collect();
        let labels: Vec<bool> = data.iter().map(|ex| ex.labels[k] >= 0.5).collect();
        if let Ok(a) = roc_auc(&scores, &labels) {
            aucs.push(a);
        }
    }
    let auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(Evaluation {
        loss: if data.is_empty() {
            0.0
        } else {
            loss / data.len() as f64
        },
        probs,
        auc,
    })
}

/// Trains from the given initial model. The monitored score is the mean
/// validation ROC-AUC, or the negated validation loss when the validation
/// labels are single-class. The returned model is the best epoch's.
///
/// Per-sample gradients are computed in parallel and summed in sample
/// order, so the result does not depend on the thread count.
pub fn train_model(
    mut model: Model,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = OptState::new(cfg.optimizer, model.tensors());
    let mut state = TrainState::new(cfg);
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    loop {
        let epoch = state.epoch + 1;
        let lr = state.current_lr;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let per_sample: Vec<(f64, Grads)> = batch
                .par_iter()
                .map(|&i| {
                    model
                        .loss_and_grad(&train[i].tokens, &train[i].labels)
                        .map(|(l, _, g)| (l, g))
                })
                .collect::<Result<_, _>>()?;
            let mut grads = model.zero_grads();
            let mut batch_loss = 0.0;
            for (l, g) in &per_sample {
                batch_loss += l;
                for (acc, x) in grads.iter_mut().zip(g) {
                    for (a, v) in acc.iter_mut().zip(x) {
                        *a += v;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: b });
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grads.iter_mut().flatten() {
                *g *= scale;
            }
            opt.step(model.tensors_mut(), &grads, lr)?;
            total += batch_loss;
        }

        let eval = evaluate(&model, val)?;
        let score = eval.auc.unwrap_or(-eval.loss);
        let decision = state.observe(score);
        history.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_auc: eval.auc,
            val_loss: eval.loss,
            lr,
        });
        log::debug!(
            "epoch {epoch}: train_loss {:.4} val {:?} lr {lr:e}",
            total / train.len() as f64,
            eval.auc
        );
        if decision.improved {
            best = model.clone();
        }
        if decision.stop {
            break;
        }
    }
    Ok(TrainOutcome {
        best,
        best_epoch: state.best_epoch,
        best_val: state.best_val,
        history,
    })
}

/// History as CSV with header `epoch,train_loss,val_auc,lr`. An undefined
/// validation AUC is written as an empty field.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_auc,lr\n");
    for r in history {
        let auc = r.val_auc.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, auc, r.lr);
    }
    out
}
