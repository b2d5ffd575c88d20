//! Run reports: raw per-run scores, candidate ranking and the aggregates
//! derived from them, as JSON plus a one-row CSV summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::hpo::{Budget, HpoSpec, RunRecord, TopKScope};
use super::{ExperimentError, Representation};
use crate::metrics::{aggregate_with, AggregateStat, StdKind};
use crate::model::ModelKind;

/// A rankable unit: one width (all seeds pooled) or one (width, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub hidden_dim: usize,
    pub seed: Option<u64>,
    /// Mean validation ROC-AUC over tasks with two-class validation
    /// splits; mean negated validation loss if there are none.
    pub val_score: Option<f64>,
    pub test_auc: Option<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStat {
    pub task: String,
    pub stat: AggregateStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub candidates: Vec<CandidateScore>,
    /// Indices into `candidates`, best validation score first.
    pub selected: Vec<usize>,
    /// Spread across the selected candidates' task-averaged test AUCs.
    pub headline: AggregateStat,
    /// Spread across tasks of the per-task means over selected candidates.
    pub by_task: AggregateStat,
    /// Spread across every individual run of the selected candidates.
    pub by_run: AggregateStat,
    pub per_task: Vec<TaskStat>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn stat(values: &[f64], kind: StdKind) -> Result<AggregateStat, ExperimentError> {
    aggregate_with(values, kind).map_err(|e| ExperimentError::Pipeline(e.to_string()))
}

/// Ranks candidates by validation score and aggregates the test AUCs of
/// the top `spec.top_k`. Depends only on the stored runs, so a report can
/// always be re-derived from its raw scores.
pub fn summarize(
    runs: &[RunRecord],
    tasks: &[String],
    configs: &[usize],
    spec: &HpoSpec,
    std_kind: StdKind,
) -> Result<Summary, ExperimentError> {
    if tasks.is_empty() {
        return Err(ExperimentError::NoTasks);
    }
    let keys: Vec<(usize, Option<u64>)> = match spec.scope {
        TopKScope::Config => configs.iter().map(|&h| (h, None)).collect(),
        TopKScope::Seed => configs
            .iter()
            .flat_map(|&h| spec.seeds.iter().map(move |&s| (h, Some(s))))
            .collect(),
    };
    let member = |r: &RunRecord, (h, s): (usize, Option<u64>)| {
        r.hidden_dim == h && s.is_none_or(|s| s == r.seed)
    };

    let mut candidates = Vec::new();
    let mut diagnostics = Vec::new();
    for &key in &keys {
        let mine: Vec<&RunRecord> = runs.iter().filter(|r| member(r, key)).collect();
        let failures: Vec<&RunRecord> =
            mine.iter().copied().filter(|r| r.error.is_some()).collect();
        let failed = mine.is_empty() || !failures.is_empty();
        for r in &failures {
            diagnostics.push(format!(
                "h={} seed={} task '{}': {}",
                r.hidden_dim,
                r.seed,
                r.task,
                r.error.as_deref().unwrap_or("")
            ));
        }
        let (val_score, test_auc) = if failed {
            (None, None)
        } else {
            let aucs: Vec<f64> = mine.iter().filter_map(|r| r.val_auc).collect();
            let val = match mean(&aucs) {
                Some(v) => Some(v),
                None => mean(
                    &mine
                        .iter()
                        .filter_map(|r| r.val_loss.map(|l| -l))
                        .collect::<Vec<_>>(),
                ),
            };
            (
                val,
                mean(&mine.iter().filter_map(|r| r.test_auc).collect::<Vec<_>>()),
            )
        };
        candidates.push(CandidateScore {
            hidden_dim: key.0,
            seed: key.1,
            val_score,
            test_auc,
            failed,
        });
    }

    let mut ranked: Vec<usize> = (0..candidates.len())
        .filter(|&i| {
            !candidates[i].failed
                && candidates[i].val_score.is_some()
                && candidates[i].test_auc.is_some()
        })
        .collect();
    if ranked.is_empty() {
        return Err(ExperimentError::AllFailed(diagnostics));
    }
    // Stable sort keeps ascending width (then seed order) among ties.
    ranked.sort_by(|&a, &b| {
        candidates[b]
            .val_score
            .unwrap()
            .total_cmp(&candidates[a].val_score.unwrap())
    });
    ranked.truncate(spec.top_k);

    let headline_values: Vec<f64> = ranked
        .iter()
        .map(|&i| candidates[i].test_auc.unwrap())
        .collect();
    let mut per_task = Vec::new();
    let mut task_means = Vec::new();
    let mut run_values = Vec::new();
    for task in tasks {
        let mut values = Vec::new();
        for &i in &ranked {
            let key = (candidates[i].hidden_dim, candidates[i].seed);
            let scores: Vec<f64> = runs
                .iter()
                .filter(|r| &r.task == task && member(r, key))
                .filter_map(|r| r.test_auc)
                .collect();
            run_values.extend(&scores);
            if let Some(m) = mean(&scores) {
                values.push(m);
            }
        }
        if values.is_empty() {
            continue;
        }
        let s = stat(&values, std_kind)?;
        task_means.push(s.mean);
        per_task.push(TaskStat {
            task: task.clone(),
            stat: s,
        });
    }
    Ok(Summary {
        headline: stat(&headline_values, std_kind)?,
        by_task: stat(&task_means, std_kind)?,
        by_run: stat(&run_values, std_kind)?,
        per_task,
        candidates,
        selected: ranked,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Row label, e.g. "LSTM Augmented SELFIES".
    pub setup: String,
    pub model: ModelKind,
    pub representation: Representation,
    pub hpo: HpoSpec,
    pub budget: Budget,
    /// Sampled widths, ascending.
    pub configs: Vec<usize>,
    pub tasks: Vec<String>,
    /// Tasks left out because their test split is single-class.
    pub excluded_tasks: Vec<String>,
    pub vocab_size: usize,
    pub vocab_hash: String,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub runs: Vec<RunRecord>,
    pub summary: Summary,
    /// Kept out of the JSON so that reruns are byte-identical; stored in a
    /// sidecar file next to it.
    #[serde(skip)]
    pub wall_clock_secs: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Timing {
    wall_clock_secs: f64,
}

/// Sidecar paths for a report at `path`: `run.json` gives `run.csv` and
/// `run.timing.json`.
pub fn companion_paths(path: &Path) -> (PathBuf, PathBuf) {
    (
        path.with_extension("csv"),
        path.with_extension("timing.json"),
    )
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<RunReport, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Json(e.to_string()))
    }

    /// Recomputes the summary from the raw runs.
    pub fn recompute(&self) -> Result<Summary, ExperimentError> {
        summarize(
            &self.runs,
            &self.tasks,
            &self.configs,
            &self.hpo,
            self.budget.std_kind,
        )
    }

    pub fn verify(&self) -> Result<(), ExperimentError> {
        if self.recompute()? != self.summary {
            return Err(ExperimentError::Inconsistent(
                "stored aggregates differ from the raw scores".into(),
            ));
        }
        Ok(())
    }

    /// `setup, mean, std` header plus one row, three decimals.
    pub fn summary_csv(&self) -> String {
        let h = &self.summary.headline;
        format!(
            "setup, mean, std\n{}, {:.3}, {:.3}\n",
            self.setup, h.mean, h.std
        )
    }

    /// All three spreads and the per-task rows.
    pub fn breakdown_csv(&self) -> String {
        let s = &self.summary;
        let mut out = String::from("setup, over, mean, std, n\n");
        for (over, a) in [
            ("configs", &s.headline),
            ("tasks", &s.by_task),
            ("runs", &s.by_run),
        ] {
            let _ = writeln!(
                out,
                "{}, {over}, {:.3}, {:.3}, {}",
                self.setup, a.mean, a.std, a.n
            );
        }
        for t in &s.per_task {
            let _ = writeln!(
                out,
                "{}, task:{}, {:.3}, {:.3}, {}",
                self.setup,
                t.task.replace(',', ";"),
                t.stat.mean,
                t.stat.std,
                t.stat.n
            );
        }
        out
    }

    /// Writes the JSON report, the CSV summary and the timing sidecar.
    pub fn emit(&self, path: &Path) -> Result<(), ExperimentError> {
        let io = |p: &Path, e: std::io::Error| ExperimentError::Io(format!("{}: {e}", p.display()));
        let (csv, timing) = companion_paths(path);
        std::fs::write(path, self.to_json()).map_err(|e| io(path, e))?;
        std::fs::write(&csv, self.summary_csv()).map_err(|e| io(&csv, e))?;
        if let Some(secs) = self.wall_clock_secs {
            let text = serde_json::to_string(&Timing {
                wall_clock_secs: secs,
            })
            .expect("timing serializes");
            std::fs::write(&timing, text).map_err(|e| io(&timing, e))?;
        }
        Ok(())
    }

    /// Reads a report written by [`RunReport::emit`], including its
    /// timing sidecar when present.
    pub fn load(path: &Path) -> Result<RunReport, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        let mut report = RunReport::from_json(&text)?;
        let (_, timing) = companion_paths(path);
        if let Ok(t) = std::fs::read_to_string(&timing) {
            let t: Timing =
                serde_json::from_str(&t).map_err(|e| ExperimentError::Json(e.to_string()))?;
            report.wall_clock_secs = Some(t.wall_clock_secs);
        }
        Ok(report)
    }
}
