//! Sequence classifiers: embedding, recurrent cell (classical LSTM or the
//! quantum-kernel LSTM), sigmoid head and binary cross-entropy, with exact
//! gradients by backpropagation through time.

mod cell;
mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::qsim::QsimError;
use crate::tokenize::PAD_INDEX;

pub use cell::CellState;
pub use checkpoint::{Checkpoint, CheckpointError};

/// Gate order used for parameter naming and storage.
pub const GATES: [&str; 4] = ["forget", "input", "cell", "output"];

pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    QkLstm,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lstm => "LSTM",
            ModelKind::QkLstm => "QK-LSTM",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("sequence is empty after removing padding")]
    EmptySequence,
    #[error("token index {index} outside vocabulary of {vocab}")]
    TokenOutOfRange { index: usize, vocab: usize },
    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error(transparent)]
    Circuit(#[from] QsimError),
}

/// Qubits needed for a hidden width: ceil(log2(h)), at least one.
pub fn qubits_for_hidden(hidden_dim: usize) -> usize {
    let mut n = 0;
    while (1usize << n) < hidden_dim {
        n += 1;
    }
    n.max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Circuit width; zero for the classical cell.
    pub n_qubits: usize,
    /// Entangler layers per circuit; zero for the classical cell.
    pub n_layers: usize,
    pub n_outputs: usize,
}

impl ModelConfig {
    pub fn lstm(vocab_size: usize, embed_dim: usize, hidden_dim: usize) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Lstm,
            vocab_size,
            embed_dim,
            hidden_dim,
            n_qubits: 0,
            n_layers: 0,
            n_outputs: 1,
        }
    }

    pub fn qk_lstm(
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        n_layers: usize,
    ) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::QkLstm,
            vocab_size,
            embed_dim,
            hidden_dim,
            n_qubits: qubits_for_hidden(hidden_dim),
            n_layers,
            n_outputs: 1,
        }
    }

    pub fn new(
        kind: ModelKind,
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
    ) -> ModelConfig {
        match kind {
            ModelKind::Lstm => ModelConfig::lstm(vocab_size, embed_dim, hidden_dim),
            ModelKind::QkLstm => ModelConfig::qk_lstm(vocab_size, embed_dim, hidden_dim, 1),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.vocab_size == 0
            || self.embed_dim == 0
            || self.hidden_dim == 0
            || self.n_outputs == 0
        {
            return bad("sizes must be positive");
        }
        match self.kind {
            ModelKind::Lstm if self.n_qubits != 0 || self.n_layers != 0 => {
                bad("classical cell takes no circuit settings")
            }
            ModelKind::QkLstm if self.n_qubits != qubits_for_hidden(self.hidden_dim) => {
                bad("n_qubits must equal ceil(log2(hidden_dim))")
            }
            ModelKind::QkLstm if self.n_qubits > crate::qsim::MAX_QUBITS => bad("too many qubits"),
            _ => Ok(()),
        }
    }

    /// Tensor names and shapes in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let (v, d, h, n, o) = (
            self.vocab_size,
            self.embed_dim,
            self.hidden_dim,
            self.n_qubits,
            self.n_outputs,
        );
        let mut out = vec![("embedding".to_string(), vec![v, d])];
        for g in GATES {
            match self.kind {
                ModelKind::Lstm => {
                    out.push((format!("w_{g}"), vec![d + h, h]));
                    out.push((format!("b_{g}"), vec![h]));
                }
                ModelKind::QkLstm => {
                    out.push((format!("w_in_{g}"), vec![d + h, n]));
                    out.push((format!("b_in_{g}"), vec![n]));
                    out.push((format!("theta_{g}"), vec![self.n_layers, n]));
                    out.push((format!("w_out_{g}"), vec![n, h]));
                    out.push((format!("b_out_{g}"), vec![h]));
                }
            }
        }
        out.push(("head_w".to_string(), vec![h, o]));
        out.push(("head_b".to_string(), vec![o]));
        out
    }
}

/// Named, row-major parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: &str, shape: &[usize]) -> Tensor {
        Tensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Gradients aligned with `Model::tensors`.
pub type Grads = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    tensors: Vec<Tensor>,
}

impl Model {
    /// All parameters zero.
    pub fn zeros(config: ModelConfig) -> Result<Model, ModelError> {
        config.validate()?;
        let tensors = config
            .layout()
            .into_iter()
            .map(|(name, shape)| Tensor::zeros(&name, &shape))
            .collect();
        Ok(Model { config, tensors })
    }

    /// Weights uniform in ±1/sqrt(fan_in) (fan_in = rows; the embedding
    /// acts on one-hot vectors, so its fan_in is the vocabulary size),
    /// biases zero, circuit angles uniform in [0, 2π).
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Result<Model, ModelError> {
        let mut model = Model::zeros(config)?;
        for t in &mut model.tensors {
            if t.shape.len() == 1 {
                continue;
            }
            if t.name.starts_with("theta_") {
                for x in &mut t.data {
                    *x = rng.gen_range(0.0..std::f64::consts::TAU);
                }
            } else {
                let bound = 1.0 / (t.shape[0] as f64).sqrt();
                for x in &mut t.data {
                    *x = rng.gen_range(-bound..bound);
                }
            }
        }
        Ok(model)
    }

    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Model, ModelError> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != tensors.len() {
            return Err(ModelError::Config(format!(
                "expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(&tensors) {
            if *name != t.name
                || *shape != t.shape
                || t.data.len() != shape.iter().product::<usize>()
            {
                return Err(ModelError::Config(format!(
                    "tensor '{}' does not match layout",
                    t.name
                )));
            }
        }
        Ok(Model { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        self.tensors.iter().map(|t| vec![0.0; t.len()]).collect()
    }

    /// Drops trailing padding and checks every index.
    fn trimmed<'a>(&self, seq: &'a [usize]) -> Result<&'a [usize], ModelError> {
        let len = seq
            .iter()
            .rposition(|&t| t != PAD_INDEX)
            .map_or(0, |p| p + 1);
        if len == 0 {
            return Err(ModelError::EmptySequence);
        }
        if let Some(&index) = seq[..len].iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(ModelError::TokenOutOfRange {
                index,
                vocab: self.config.vocab_size,
            });
        }
        Ok(&seq[..len])
    }

    /// Embedding rows of the unpadded sequence.
    pub fn embed(&self, seq: &[usize]) -> Result<Vec<Vec<f64>>, ModelError> {
        let d = self.config.embed_dim;
        let table = &self.tensors[0].data;
        Ok(self
            .trimmed(seq)?
            .iter()
            .map(|&t| table[t * d..(t + 1) * d].to_vec())
            .collect())
    }

    /// Final hidden state after the unpadded sequence, from a zero state.
    pub fn forward_sequence(&self, seq: &[usize]) -> Result<Vec<f64>, ModelError> {
        let seq = self.trimmed(seq)?;
        Ok(self.run(seq, false)?.0.h)
    }

    /// Output probabilities.
    pub fn predict(&self, seq: &[usize]) -> Result<Vec<f64>, ModelError> {
        let h = self.forward_sequence(seq)?;
        Ok(self.head(&h).into_iter().map(sigmoid).collect())
    }

    /// Summed binary cross-entropy over outputs.
    pub fn loss(&self, seq: &[usize], labels: &[f64]) -> Result<f64, ModelError> {
        self.check_labels(labels)?;
        let p = self.predict(seq)?;
        Ok(p.iter().zip(labels).map(|(&p, &y)| bce_loss(p, y)).sum())
    }

    fn check_labels(&self, labels: &[f64]) -> Result<(), ModelError> {
        if labels.len() != self.config.n_outputs {
            return Err(ModelError::LabelCount {
                expected: self.config.n_outputs,
                got: labels.len(),
            });
        }
        Ok(())
    }

    /// Loss and its gradient with respect to every tensor. Returns the
    /// predicted probabilities as well.
    pub fn loss_and_grad(
        &self,
        seq: &[usize],
        labels: &[f64],
    ) -> Result<(f64, Vec<f64>, Grads), ModelError> {
        self.check_labels(labels)?;
        let seq = self.trimmed(seq)?;
        let (state, trace) = self.run(seq, true)?;
        let logits = self.head(&state.h);
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let loss = probs
            .iter()
            .zip(labels)
            .map(|(&p, &y)| bce_loss(p, y))
            .sum();
        let dlogit: Vec<f64> = probs
            .iter()
            .zip(labels)
            .map(|(&p, &y)| bce_grad(p, y))
            .collect();

        let mut grads = self.zero_grads();
        let (h, o) = (self.config.hidden_dim, self.config.n_outputs);
        let head_w = self.tensors.len() - 2;
        let mut dh = vec![0.0; h];
        for i in 0..h {
            for k in 0..o {
                grads[head_w][i * o + k] += state.h[i] * dlogit[k];
                dh[i] += self.tensors[head_w].data[i * o + k] * dlogit[k];
            }
        }
        for k in 0..o {
            grads[head_w + 1][k] += dlogit[k];
        }
        self.backward(seq, &trace, dh, &mut grads)?;
        Ok((loss, probs, grads))
    }

    fn head(&self, h: &[f64]) -> Vec<f64> {
        let o = self.config.n_outputs;
        let w = &self.tensors[self.tensors.len() - 2].data;
        let b = &self.tensors[self.tensors.len() - 1].data;
        let mut z = b.clone();
        for (i, &hi) in h.iter().enumerate() {
            for k in 0..o {
                z[k] += hi * w[i * o + k];
            }
        }
        z
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

/// -[y ln p + (1-y) ln(1-p)] with p clamped to [ε, 1-ε].
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = clamp_prob(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// d(bce)/d(logit). Zero where the clamp is active, matching the loss.
fn bce_grad(p: f64, y: f64) -> f64 {
    if p != clamp_prob(p) {
        0.0
    } else {
        p - y
    }
}
