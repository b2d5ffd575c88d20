use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use molseq::experiment::{
    hidden_grid, load_sider_csv, run_hpo, train_setup, workers_from_env, Budget, DatasetTable,
    HpoSpec, LoadOptions, Representation, RunReport, TopKScope, WORKERS_ENV,
};
use molseq::metrics::{curve_csv, roc_auc, roc_curve, StdKind};
use molseq::model::{Checkpoint, ModelKind};
use molseq::selfies::{decode_selfies, encode_selfies, parse_tokens, to_text};
use molseq::smiles::{augment, canonical_smiles, canonicalize, parse_smiles};
use molseq::train::{history_csv, Optimizer, TrainConfig};

#[derive(Parser)]
#[command(
    name = "molseq",
    version,
    about = "Molecular string models: SMILES/SELFIES, LSTM and quantum-kernel LSTM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical SMILES, one per input line.
    Canon(LinesIo),
    /// Random SMILES spellings of each input, shortest first.
    Augment {
        #[command(flatten)]
        io: LinesIo,
        #[arg(long, default_value_t = 20)]
        n_gen: usize,
        #[arg(long, default_value_t = 5)]
        n_keep: usize,
        /// Line i is augmented with seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// SELFIES conversion, one string per line.
    Selfies {
        #[arg(value_enum)]
        direction: Direction,
        #[command(flatten)]
        io: LinesIo,
    },
    /// ROC-AUC of a `score,label` CSV.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        /// Also write the ROC curve as `fpr,tpr` CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Train one width with one seed on each task.
    Train(TrainCmd),
    /// Random search over the hidden width with top-k aggregation.
    Hpo(HpoCmd),
    /// Verify a JSON report and print it in another format.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        format: ReportFormat,
    },
}

#[derive(Args)]
struct LinesIo {
    /// Input file; stdin when omitted.
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Encode,
    Decode,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
    Breakdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum Setup {
    Smiles,
    AugSmiles,
    Selfies,
    AugSelfies,
}

impl From<Setup> for Representation {
    fn from(s: Setup) -> Self {
        match s {
            Setup::Smiles => Representation::Smiles,
            Setup::AugSmiles => Representation::AugSmiles,
            Setup::Selfies => Representation::Selfies,
            Setup::AugSelfies => Representation::AugSelfies,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lstm,
    QkLstm,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Lstm => ModelKind::Lstm,
            Kind::QkLstm => ModelKind::QkLstm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Opt {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Config,
    Seed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Spread {
    Population,
    Sample,
}

/// Data and training settings shared by `train` and `hpo`.
#[derive(Args)]
struct Common {
    /// SIDER-style CSV: SMILES column then 27 binary label columns.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    setup: Setup,
    #[arg(long, value_enum)]
    model: Kind,
    /// Drop rows whose SMILES do not parse instead of aborting.
    #[arg(long)]
    skip_invalid: bool,
    /// Random subsample of at most this many rows.
    #[arg(long)]
    max_rows: Option<usize>,
    /// Task (column) names to run; all when omitted.
    #[arg(long = "task")]
    tasks: Vec<String>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    es_patience: usize,
    #[arg(long, default_value_t = 5)]
    lr_patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = Opt::Adam)]
    optimizer: Opt,
    #[arg(long, default_value_t = 64)]
    embed_dim: usize,
    /// Entangler layers per circuit (quantum-kernel cell only).
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 20)]
    n_gen: usize,
    #[arg(long, default_value_t = 5)]
    n_keep: usize,
    #[arg(long, value_enum, default_value_t = Spread::Population)]
    std: Spread,
}

impl Common {
    fn table(&self) -> Result<DatasetTable> {
        let opts = LoadOptions {
            skip_invalid: self.skip_invalid,
        };
        let mut t = load_sider_csv(&self.data, opts)
            .with_context(|| format!("loading {}", self.data.display()))?;
        for r in &t.rejected {
            warn!("skipped row {} ({}): {}", r.row, r.smiles, r.reason);
        }
        if let Some(n) = self.max_rows {
            t = t.subsample(n, self.split_seed);
        }
        info!("{} rows, {} tasks", t.len(), t.task_names().len());
        Ok(t)
    }

    fn budget(&self) -> Budget {
        let mut b = Budget {
            train: TrainConfig {
                max_epochs: self.epochs,
                es_patience: Some(self.es_patience),
                lr_patience: Some(self.lr_patience),
                lr: self.lr,
                batch_size: self.batch_size,
                optimizer: match self.optimizer {
                    Opt::Adam => Optimizer::adam(),
                    Opt::Sgd => Optimizer::Sgd,
                },
                ..TrainConfig::default()
            },
            embed_dim: self.embed_dim,
            n_layers: self.layers,
            split_seed: self.split_seed,
            tasks: (!self.tasks.is_empty()).then(|| self.tasks.clone()),
            std_kind: match self.std {
                Spread::Population => StdKind::Population,
                Spread::Sample => StdKind::Sample,
            },
            ..Budget::default()
        };
        b.augment.n_generate = self.n_gen;
        b.augment.n_keep = self.n_keep;
        b
    }
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden width; the smallest grid value when omitted.
    #[arg(long)]
    hidden: Option<usize>,
    /// Output directory for the report, vocabulary, histories and checkpoints.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HpoCmd {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 4)]
    n_configs: usize,
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    #[arg(long, value_enum, default_value_t = Scope::Config)]
    top_k_scope: Scope,
    /// Training seeds per configuration.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    search_seed: u64,
    /// Replace the built-in width grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// JSON report path; the CSV summary and timing files go next to it.
    #[arg(long)]
    out: PathBuf,
}

fn read_lines(input: &Option<PathBuf>) -> Result<Vec<String>> {
    let reader: Box<dyn BufRead> = match input {
        Some(p) => Box::new(io::BufReader::new(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    reader.lines().map(|l| l.map_err(Into::into)).collect()
}

/// Applies `f` to every non-blank line. Failures are reported on stderr
/// and the remaining lines still run; the command fails at the end.
fn map_lines(io: &LinesIo, mut f: impl FnMut(usize, &str) -> Result<Vec<String>>) -> Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut failed = 0;
    for (i, line) in read_lines(&io.input)?.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match f(i, line) {
            Ok(results) => {
                for r in results {
                    writeln!(out, "{r}")?;
                }
            }
            Err(e) => {
                eprintln!("line {}: {e:#}", i + 1);
                failed += 1;
            }
        }
    }
    out.flush()?;
    if failed > 0 {
        bail!("{failed} line(s) failed");
    }
    Ok(())
}

fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            bail!("line {}: expected 2 fields, found {}", i + 1, fields.len());
        }
        let Ok(score) = fields[0].parse::<f64>() else {
            if i == 0 {
                continue; // header
            }
            bail!("line {}: bad score '{}'", i + 1, fields[0]);
        };
        let label = match fields[1] {
            "1" | "1.0" | "true" => true,
            "0" | "0.0" | "false" => false,
            other => bail!("line {}: label '{other}' is not 0 or 1", i + 1),
        };
        scores.push(score);
        labels.push(label);
    }
    Ok((scores, labels))
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    s.split('_')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn train(cmd: &TrainCmd) -> Result<()> {
    let c = &cmd.common;
    let table = c.table()?;
    let kind = ModelKind::from(c.model);
    let hidden = cmd.hidden.unwrap_or(hidden_grid(kind)[0]);
    let trained = train_setup(&table, c.setup.into(), kind, hidden, cmd.seed, &c.budget())?;
    fs::create_dir_all(&cmd.out).with_context(|| format!("creating {}", cmd.out.display()))?;
    let vocab_hash = trained.vocab.hash();
    fs::write(cmd.out.join("vocab.json"), trained.vocab.to_json())?;
    for (k, (run, outcome)) in trained
        .report
        .runs
        .iter()
        .zip(&trained.outcomes)
        .enumerate()
    {
        let Some(outcome) = outcome else {
            warn!("{}: {}", run.task, run.error.as_deref().unwrap_or("failed"));
            continue;
        };
        let dir = cmd.out.join(format!("{k:02}_{}", slug(&run.task)));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("history.csv"), history_csv(&outcome.history))?;
        Checkpoint::from_model(&outcome.best, &vocab_hash).save(&dir.join("checkpoint.json"))?;
    }
    let path = cmd.out.join("report.json");
    trained.report.emit(&path)?;
    print!("{}", trained.report.summary_csv());
    info!("wrote {}", cmd.out.display());
    Ok(())
}

fn hpo(cmd: &HpoCmd) -> Result<()> {
    let c = &cmd.common;
    let table = c.table()?;
    let kind = ModelKind::from(c.model);
    let spec = HpoSpec {
        grid: cmd.grid.clone().unwrap_or_else(|| hidden_grid(kind)),
        n_configs: cmd.n_configs,
        top_k: cmd.top_k,
        seeds: cmd.seeds.clone(),
        scope: match cmd.top_k_scope {
            Scope::Config => TopKScope::Config,
            Scope::Seed => TopKScope::Seed,
        },
        search_seed: cmd.search_seed,
        ..HpoSpec::new(kind)
    };
    let report = run_hpo(&table, c.setup.into(), &spec, &c.budget())?;
    if let Some(dir) = cmd.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    report.emit(&cmd.out)?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Canon(io) => map_lines(&io, |_, s| Ok(vec![canonicalize(s)?])),
        Command::Augment {
            io,
            n_gen,
            n_keep,
            seed,
        } => map_lines(&io, |i, s| {
            Ok(augment(s, n_gen, n_keep, seed.wrapping_add(i as u64))?)
        }),
        Command::Selfies { direction, io } => map_lines(&io, |_, s| {
            Ok(vec![match direction {
                Direction::Encode => to_text(&encode_selfies(&parse_smiles(s)?)?),
                Direction::Decode => canonical_smiles(&decode_selfies(&parse_tokens(s)?)),
            }])
        }),
        Command::Eval { input, curve } => {
            let (scores, labels) = read_scores(&input)?;
            let auc = roc_auc(&scores, &labels)?;
            println!("{auc:.6}");
            if let Some(path) = curve {
                fs::write(&path, curve_csv(&roc_curve(&scores, &labels)?))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Train(cmd) => train(&cmd),
        Command::Hpo(cmd) => hpo(&cmd),
        Command::Report { input, format } => {
            let report = RunReport::load(&input)?;
            report
                .verify()
                .map_err(|e| anyhow!("{}: {e}", input.display()))?;
            match format {
                ReportFormat::Csv => print!("{}", report.summary_csv()),
                ReportFormat::Json => print!("{}", report.to_json()),
                ReportFormat::Breakdown => print!("{}", report.breakdown_csv()),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = workers_from_env()
        .map_or(Ok(()), |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .with_context(|| format!("{WORKERS_ENV}={n}"))
        })
        .and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
