//! Seeded random search over the hidden width, per-task training and
//! top-k selection by validation score.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{summarize, RunReport};
use super::{prepare_setup, AugmentSpec, DatasetTable, ExperimentError, Prepared, Representation};
use crate::metrics::StdKind;
use crate::model::{Model, ModelConfig, ModelKind};
use crate::tokenize::Vocab;
use crate::train::{evaluate, train_model, TrainConfig, TrainOutcome};

/// Hidden widths searched for each cell: 32..=128 step 16 for the
/// classical cell, 8..=32 step 4 for the quantum-kernel cell.
pub fn hidden_grid(kind: ModelKind) -> Vec<usize> {
    match kind {
        ModelKind::Lstm => (32..=128).step_by(16).collect(),
        ModelKind::QkLstm => (8..=32).step_by(4).collect(),
    }
}

/// What a top-k candidate is: a hidden width (scores averaged over seeds)
/// or a single (width, seed) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKScope {
    #[default]
    Config,
    Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoSpec {
    pub kind: ModelKind,
    pub grid: Vec<usize>,
    pub n_configs: usize,
    pub top_k: usize,
    pub seeds: Vec<u64>,
    pub scope: TopKScope,
    /// Seed of the configuration sampler.
    pub search_seed: u64,
}

impl HpoSpec {
    pub fn new(kind: ModelKind) -> HpoSpec {
        HpoSpec {
            kind,
            grid: hidden_grid(kind),
            n_configs: 4,
            top_k: 3,
            seeds: vec![0],
            scope: TopKScope::Config,
            search_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.n_configs == 0 || self.n_configs > self.grid.len() {
            return bad(format!("n_configs must be in 1..={}", self.grid.len()));
        }
        if self.top_k == 0 || self.seeds.is_empty() {
            return bad("top_k and the seed list must be non-empty".into());
        }
        let mut g = self.grid.clone();
        g.sort_unstable();
        g.dedup();
        if g.len() != self.grid.len() || g.first() == Some(&0) {
            return bad("grid values must be distinct and positive".into());
        }
        Ok(())
    }
}

/// Everything besides the searched width that shapes a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Training settings; the seed is replaced per run.
    pub train: TrainConfig,
    pub embed_dim: usize,
    /// Entangler layers of the quantum-kernel cell.
    pub n_layers: usize,
    pub split_seed: u64,
    pub augment: AugmentSpec,
    /// Task names to run; all when `None`.
    pub tasks: Option<Vec<String>>,
    pub std_kind: StdKind,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            train: TrainConfig::default(),
            embed_dim: 64,
            n_layers: 1,
            split_seed: 0,
            augment: AugmentSpec::default(),
            tasks: None,
            std_kind: StdKind::Population,
        }
    }
}

/// Outcome of training one (task, width, seed) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: String,
    pub hidden_dim: usize,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    /// Validation ROC-AUC of the kept epoch; `None` for single-class validation.
    pub val_auc: Option<f64>,
    pub val_loss: Option<f64>,
    pub test_auc: Option<f64>,
    pub error: Option<String>,
}

/// Uniform sample of `n_configs` widths without replacement, ascending.
pub fn sample_configs(spec: &HpoSpec) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.search_seed);
    let mut picked: Vec<usize> = spec
        .grid
        .choose_multiple(&mut rng, spec.n_configs)
        .copied()
        .collect();
    picked.sort_unstable();
    picked
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one run, a function of its identity only.
pub fn run_seed(seed: u64, task: usize, hidden_dim: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ task as u64) ^ hidden_dim as u64)
}

pub fn model_config(
    kind: ModelKind,
    vocab_size: usize,
    hidden_dim: usize,
    budget: &Budget,
) -> ModelConfig {
    match kind {
        ModelKind::Lstm => ModelConfig::lstm(vocab_size, budget.embed_dim, hidden_dim),
        ModelKind::QkLstm => {
            ModelConfig::qk_lstm(vocab_size, budget.embed_dim, hidden_dim, budget.n_layers)
        }
    }
}

/// Trains one model on one task and scores its best epoch on the test split.
pub fn train_task(
    table: &DatasetTable,
    prepared: &Prepared,
    task: usize,
    kind: ModelKind,
    hidden_dim: usize,
    seed: u64,
    budget: &Budget,
) -> Result<(RunRecord, TrainOutcome), ExperimentError> {
    let data = prepared.task_data(table, task);
    let s = run_seed(seed, task, hidden_dim);
    let config = model_config(kind, prepared.vocab.len(), hidden_dim, budget);
    let model = Model::init(config, &mut ChaCha8Rng::seed_from_u64(s))?;
    let cfg = TrainConfig {
        seed: splitmix(s),
        ..budget.train.clone()
    };
    let out = train_model(model, &data.train, &data.val, &cfg)?;
    let kept = &out.history[out.best_epoch.max(1) - 1];
    let test = evaluate(&out.best, &data.test)?;
    let record = RunRecord {
        task: table.task_names()[task].clone(),
        hidden_dim,
        seed,
        epochs: out.history.len(),
        best_epoch: out.best_epoch,
        val_auc: kept.val_auc,
        val_loss: Some(kept.val_loss),
        test_auc: test.auc,
        error: None,
    };
    Ok((record, out))
}

/// Resolves the requested task names, then splits them into tasks whose
/// test split has both classes and tasks that must be excluded.
pub fn resolve_tasks(
    table: &DatasetTable,
    prepared: &Prepared,
    wanted: Option<&[String]>,
) -> Result<(Vec<usize>, Vec<usize>), ExperimentError> {
    let tasks: Vec<usize> = match wanted {
        None => (0..table.task_names().len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                table
                    .task_index(n)
                    .ok_or_else(|| ExperimentError::Config(format!("unknown task '{n}'")))
            })
            .collect::<Result<_, _>>()?,
    };
    let (mut keep, mut drop) = (Vec::new(), Vec::new());
    for t in tasks {
        let pos = prepared
            .test
            .iter()
            .filter(|s| table.labels[s.row][t] == 1)
            .count();
        if pos == 0 || pos == prepared.test.len() {
            drop.push(t);
        } else {
            keep.push(t);
        }
    }
    Ok((keep, drop))
}

/// Full search for one setup: prepare, sample widths, train every
/// (task, width, seed) model, then select and aggregate.
pub fn run_hpo(
    table: &DatasetTable,
    representation: Representation,
    spec: &HpoSpec,
    budget: &Budget,
) -> Result<RunReport, ExperimentError> {
    Ok(execute(table, representation, spec, budget)?.report)
}

/// Report of a single-width run plus the models behind it.
#[derive(Debug, Clone)]
pub struct TrainedSetup {
    pub report: RunReport,
    pub vocab: Vocab,
    /// Aligned with `report.runs`; `None` where the run failed.
    pub outcomes: Vec<Option<TrainOutcome>>,
}

/// Trains one width with one seed on every selected task and keeps the
/// trained models.
pub fn train_setup(
    table: &DatasetTable,
    representation: Representation,
    kind: ModelKind,
    hidden_dim: usize,
    seed: u64,
    budget: &Budget,
) -> Result<TrainedSetup, ExperimentError> {
    let spec = HpoSpec {
        grid: vec![hidden_dim],
        n_configs: 1,
        top_k: 1,
        seeds: vec![seed],
        ..HpoSpec::new(kind)
    };
    execute(table, representation, &spec, budget)
}

fn execute(
    table: &DatasetTable,
    representation: Representation,
    spec: &HpoSpec,
    budget: &Budget,
) -> Result<TrainedSetup, ExperimentError> {
    let started = Instant::now();
    spec.validate()?;
    budget.train.validate()?;
    let prepared = prepare_setup(table, representation, budget.split_seed, &budget.augment)?;
    prepared.check_leakage()?;
    let (tasks, excluded) = resolve_tasks(table, &prepared, budget.tasks.as_deref())?;
    for &t in &excluded {
        log::warn!(
            "task '{}' has a single-class test split; excluded",
            table.task_names()[t]
        );
    }
    let configs = sample_configs(spec);
    let units: Vec<(usize, usize, u64)> = tasks
        .iter()
        .flat_map(|&t| {
            configs
                .iter()
                .flat_map(move |&h| spec.seeds.iter().map(move |&s| (t, h, s)))
        })
        .collect();
    log::info!(
        "{} {}: {} runs over widths {:?}",
        spec.kind.label(),
        representation.label(),
        units.len(),
        configs
    );
    let (runs, outcomes): (Vec<RunRecord>, Vec<Option<TrainOutcome>>) = units
        .par_iter()
        .map(
            |&(t, h, s)| match train_task(table, &prepared, t, spec.kind, h, s, budget) {
                Ok((record, out)) => (record, Some(out)),
                Err(e) => (
                    RunRecord {
                        task: table.task_names()[t].clone(),
                        hidden_dim: h,
                        seed: s,
                        epochs: 0,
                        best_epoch: 0,
                        val_auc: None,
                        val_loss: None,
                        test_auc: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            },
        )
        .unzip();

    let task_names: Vec<String> = tasks
        .iter()
        .map(|&t| table.task_names()[t].clone())
        .collect();
    let summary = summarize(&runs, &task_names, &configs, spec, budget.std_kind)?;
    let report = RunReport {
        setup: format!("{} {}", spec.kind.label(), representation.label()),
        model: spec.kind,
        representation,
        hpo: spec.clone(),
        budget: budget.clone(),
        configs,
        tasks: task_names,
        excluded_tasks: excluded
            .iter()
            .map(|&t| table.task_names()[t].clone())
            .collect(),
        vocab_size: prepared.vocab.len(),
        vocab_hash: prepared.vocab.hash(),
        n_train: prepared.train.len(),
        n_val: prepared.val.len(),
        n_test: prepared.test.len(),
        runs,
        summary,
        wall_clock_secs: Some(started.elapsed().as_secs_f64()),
    };
    Ok(TrainedSetup {
        report,
        vocab: prepared.vocab,
        outcomes,
    })
}
