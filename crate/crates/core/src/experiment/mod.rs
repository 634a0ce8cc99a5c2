//! Experiment driver: sweeps over variants, seeds and one hyperparameter
//! axis, with result tables and plot-ready series.

mod config;
mod output;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{error, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{apply_key, apply_train_key, parse_pairs, read_pairs, ConfigError};
pub use output::{emit_plot_data, read_predictions, write_predictions, PredictionDump};

use crate::graph::{
    generate_sbm_graph, make_artificial_imbalance_with_rng, select_minority_classes, stratified_split, Graph,
    GraphError, GraphFiles, ImbalanceConfig, SbmConfig, SplitMasks,
};
use crate::metrics::MetricsReport;
use crate::oversample::OversampleScale;
use crate::train::{train_with_rng, TrainConfig, TrainError, Variant};

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "GRAPHSMOTE_OUT";

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    /// Directory with `edges.tsv`, `features.txt` and `labels.txt`.
    Files(PathBuf),
    Sbm(SbmConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Split {
    /// Per-class fractions of the labeled nodes; the remainder is test.
    Stratified { train_fraction: f64, val_fraction: f64 },
    /// `minority_count` classes drawn at random are down-sampled to
    /// `ratio × majority_train_size` training nodes.
    Artificial {
        ratio: f64,
        majority_train_size: usize,
        minority_count: usize,
        val_fraction: f64,
    },
}

impl Split {
    pub fn default_stratified() -> Self {
        Split::Stratified {
            train_fraction: 0.25,
            val_fraction: 0.25,
        }
    }

    pub fn default_artificial() -> Self {
        Split::Artificial {
            ratio: 0.5,
            majority_train_size: 20,
            minority_count: 3,
            val_fraction: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    Scale,
    Ratio,
    Lambda,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Scale => "scale",
            SweepAxis::Ratio => "ratio",
            SweepAxis::Lambda => "lambda",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    pub split: Split,
    pub sweep_axis: SweepAxis,
    /// Kept verbatim so outputs echo values as configured.
    pub sweep_values: Vec<String>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub workers: usize,
    pub dump_predictions: bool,
    pub log_synthetic: bool,
    pub save_checkpoints: bool,
    /// Shared training settings; variant, seed and the swept field are
    /// overridden per run.
    pub base: TrainConfig,
}

/// The synthetic fixture: four blocks {200, 200, 200, 20}.
pub fn default_sbm() -> SbmConfig {
    SbmConfig::new(vec![200, 200, 200, 20], 0.05, 0.005, 16, 0)
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Sbm(default_sbm()),
            split: Split::default_stratified(),
            sweep_axis: SweepAxis::None,
            sweep_values: Vec::new(),
            variants: Variant::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            output: std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            dump_predictions: false,
            log_synthetic: false,
            save_checkpoints: false,
            base: TrainConfig {
                scale: OversampleScale::Balance,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("could not load dataset from {dir} (expected edges.tsv, features.txt and labels.txt): {source}")]
    Dataset {
        dir: PathBuf,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ExperimentSpec {
    /// Defaults overridden by `pairs` in order.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut spec = Self::default();
        for (k, v) in pairs {
            apply_key(&mut spec, k, v)?;
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("at least one seed is required".into()));
        }
        if self.variants.is_empty() {
            return Err(ConfigError::Invalid("at least one variant is required".into()));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        match (self.sweep_axis, self.sweep_values.is_empty()) {
            (SweepAxis::None, false) => {
                return Err(ConfigError::Invalid("sweep_values given without a sweep axis".into()))
            }
            (SweepAxis::None, true) => {}
            (_, true) => return Err(ConfigError::Invalid("sweep axis given without sweep_values".into())),
            (_, false) => {}
        }
        if self.sweep_axis == SweepAxis::Ratio && !matches!(self.split, Split::Artificial { .. }) {
            return Err(ConfigError::Invalid("a ratio sweep needs `split = artificial`".into()));
        }
        for v in &self.sweep_values {
            let mut probe = self.clone();
            probe.apply_sweep(Some(v))?;
            probe.base.validate().map_err(ConfigError::Invalid)?;
        }
        self.base.validate().map_err(ConfigError::Invalid)
    }

    fn apply_sweep(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        let Some(value) = value else { return Ok(()) };
        let bad = |msg: String| ConfigError::Value {
            key: "sweep_values".into(),
            value: value.into(),
            msg,
        };
        match self.sweep_axis {
            SweepAxis::None => {}
            SweepAxis::Scale => self.base.scale = value.parse().map_err(bad)?,
            SweepAxis::Lambda => {
                self.base.lambda = value
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
            }
            SweepAxis::Ratio => {
                let r: f64 = value
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                if !(r > 0.0 && r <= 1.0) {
                    return Err(bad("imbalance ratio must lie in (0, 1]".into()));
                }
                if let Split::Artificial { ratio, .. } = &mut self.split {
                    *ratio = r;
                }
            }
        }
        Ok(())
    }

    pub fn load_graph(&self) -> Result<Graph, ExperimentError> {
        match &self.dataset {
            DatasetSource::Files(dir) => GraphFiles::in_dir(dir)
                .load()
                .map_err(|source| ExperimentError::Dataset {
                    dir: dir.clone(),
                    source,
                }),
            DatasetSource::Sbm(cfg) => Ok(generate_sbm_graph(cfg)?),
        }
    }

    /// `(sweep value, variant, seed)` in output order.
    pub fn jobs(&self) -> Vec<Job> {
        let sweep: Vec<Option<String>> = if self.sweep_axis == SweepAxis::None {
            vec![None]
        } else {
            self.sweep_values.iter().cloned().map(Some).collect()
        };
        let mut out = Vec::new();
        for s in &sweep {
            for &variant in &self.variants {
                for &seed in &self.seeds {
                    out.push(Job {
                        sweep: s.clone(),
                        variant,
                        seed,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Job {
    pub sweep: Option<String>,
    pub variant: Variant,
    pub seed: u64,
}

impl Job {
    /// File stem for this run's artifacts.
    pub fn tag(&self) -> String {
        match &self.sweep {
            Some(s) => format!("{s}_{}_seed{}", self.variant, self.seed),
            None => format!("{}_seed{}", self.variant, self.seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub job: Job,
    pub outcome: Result<RunSummary, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub minority_classes: Vec<usize>,
    pub best_epoch: usize,
    pub epochs: usize,
    pub test: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunResult>,
}

impl ExperimentResult {
    pub fn aborted(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Test reports of successful runs for one sweep value and variant, in
    /// seed order.
    pub fn reports(&self, sweep: Option<&str>, variant: Variant) -> Vec<&MetricsReport> {
        self.runs
            .iter()
            .filter(|r| r.job.sweep.as_deref() == sweep && r.job.variant == variant)
            .filter_map(|r| r.outcome.as_ref().ok().map(|s| &s.test))
            .collect()
    }
}

/// Split for one run, drawn from the run's generator. Under the artificial
/// protocol the chosen minority classes are also returned.
pub fn make_split(
    g: &Graph,
    split: &Split,
    rng: &mut ChaCha8Rng,
) -> Result<(SplitMasks, Option<Vec<usize>>), GraphError> {
    match *split {
        Split::Stratified {
            train_fraction,
            val_fraction,
        } => Ok((stratified_split(g, train_fraction, val_fraction, rng)?, None)),
        Split::Artificial {
            ratio,
            majority_train_size,
            minority_count,
            val_fraction,
        } => {
            let minority = select_minority_classes(g.num_classes(), minority_count, rng);
            let cfg = ImbalanceConfig {
                minority_classes: minority.clone(),
                ratio,
                majority_train_size,
                val_fraction,
            };
            Ok((make_artificial_imbalance_with_rng(g, &cfg, rng)?, Some(minority)))
        }
    }
}

fn run_job(g: &Graph, spec: &ExperimentSpec, job: &Job) -> Result<RunSummary, String> {
    let mut local = spec.clone();
    local.apply_sweep(job.sweep.as_deref()).map_err(|e| e.to_string())?;
    let mut cfg = local.base.clone();
    cfg.variant = job.variant;
    cfg.seed = job.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let (masks, minority) = make_split(g, &local.split, &mut rng).map_err(|e| e.to_string())?;
    if minority.is_some() {
        cfg.minority_classes = minority;
    }
    let tag = job.tag();
    let out_dir = &spec.output;
    let mut log = if spec.log_synthetic {
        let path = out_dir.join("synthetic").join(format!("{tag}.csv"));
        let mut f = BufWriter::new(File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?);
        writeln!(f, "epoch,class,v,nn,delta").map_err(|e| e.to_string())?;
        Some(f)
    } else {
        None
    };
    let trained = train_with_rng(g, &masks, &cfg, &mut rng, log.as_mut().map(|w| w as &mut dyn Write))
        .map_err(|e: TrainError| e.to_string())?;
    if let Some(mut f) = log {
        f.flush().map_err(|e| e.to_string())?;
    }
    let record_path = out_dir.join("records").join(format!("{tag}.jsonl"));
    let write = |path: &Path, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| -> Result<(), String> {
        let mut w = BufWriter::new(File::create(path).map_err(|e| format!("{}: {e}", path.display()))?);
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| format!("{}: {e}", path.display()))
    };
    write(&record_path, &|w| trained.record.write_jsonl(w))?;
    if spec.dump_predictions {
        let path = out_dir.join("predictions").join(format!("{tag}.csv"));
        write(&path, &|w| {
            write_predictions(w, &trained.probabilities, g.labels(), masks.test())
        })?;
    }
    if spec.save_checkpoints {
        let path = out_dir.join("checkpoints").join(format!("{tag}.ckpt"));
        trained.params.store.save(&path).map_err(|e| e.to_string())?;
    }
    Ok(RunSummary {
        minority_classes: trained.record.minority_classes.clone(),
        best_epoch: trained.record.best_epoch,
        epochs: trained.record.epochs.len(),
        test: trained.record.test,
    })
}

/// Runs every job on a bounded pool of worker threads and writes
/// `runs.csv`, `summary.csv`, `table.csv`, the metric grids and the plot
/// series into `spec.output`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let g = spec.load_graph()?;
    let mut dirs = vec!["records", "series"];
    if spec.dump_predictions {
        dirs.push("predictions");
    }
    if spec.log_synthetic {
        dirs.push("synthetic");
    }
    if spec.save_checkpoints {
        dirs.push("checkpoints");
    }
    for d in dirs {
        let p = spec.output.join(d);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }

    let jobs = spec.jobs();
    info!("{} runs on {} worker(s)", jobs.len(), spec.workers);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunSummary, String>>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..spec.workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let outcome = run_job(&g, spec, job);
                if let Err(e) = &outcome {
                    error!("run {} aborted: {e}", job.tag());
                }
                results.lock().expect("result slots")[i] = Some(outcome);
            });
        }
    });
    let runs = jobs
        .into_iter()
        .zip(results.into_inner().expect("result slots"))
        .map(|(job, outcome)| RunResult {
            job,
            outcome: outcome.expect("every job ran"),
        })
        .collect();
    let result = ExperimentResult {
        spec: spec.clone(),
        runs,
    };
    output::write_tables(&result)?;
    emit_plot_data(&result)?;
    Ok(result)
}
