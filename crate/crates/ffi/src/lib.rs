//! C interface to `graphsmote`.
//!
//! Every fallible function returns a [`GsStatus`]. On failure a message for
//! the calling thread is available from [`gs_last_error_message`] until the
//! next failing call on that thread. Handles are opaque; each `*_free`
//! accepts NULL.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use graphsmote::autodiff::{Mat, TensorError};
use graphsmote::experiment::{apply_train_key, ConfigError};
use graphsmote::graph::{generate_sbm_graph, stratified_split, Graph, GraphError, GraphFiles, SbmConfig, SplitMasks};
use graphsmote::metrics::MetricsReport;
use graphsmote::train::{train, TrainConfig, TrainError, TrainOutput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// Non-finite values during training.
    Numeric = 5,
    Training = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Headline metrics. `auc_macro` is NaN when no class has both positive and
/// negative nodes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GsMetrics {
    pub acc: f64,
    pub auc_macro: f64,
    pub f_macro: f64,
}

impl From<&MetricsReport> for GsMetrics {
    fn from(r: &MetricsReport) -> Self {
        Self {
            acc: r.acc,
            auc_macro: r.auc_macro,
            f_macro: r.f_macro,
        }
    }
}

pub struct GsGraph(Graph);

pub struct GsConfig(TrainConfig);

pub struct GsRun {
    output: TrainOutput,
    masks: SplitMasks,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GsStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(GsStatus::NullPointer, format!("{what} is NULL"))
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Failure(GsStatus::InvalidArgument, msg.into())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let status = match e {
            GraphError::Io { .. } => GsStatus::Io,
            GraphError::Parse { .. } => GsStatus::Parse,
            _ => GsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(GsStatus::InvalidArgument, e.to_string())
    }
}

fn train_status(e: &TrainError) -> GsStatus {
    match e {
        TrainError::Config(_) | TrainError::Edge(_) => GsStatus::InvalidArgument,
        TrainError::Graph(GraphError::Io { .. }) | TrainError::Io(_) => GsStatus::Io,
        TrainError::Graph(_) => GsStatus::InvalidArgument,
        TrainError::Tensor(TensorError::NonFinite { .. }) => GsStatus::Numeric,
        TrainError::Tensor(_) => GsStatus::Training,
        TrainError::Aborted { source, .. } => match train_status(source) {
            GsStatus::Numeric => GsStatus::Numeric,
            _ => GsStatus::Training,
        },
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        Failure(train_status(&e), e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            GsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads `edges.tsv`, `features.txt` and `labels.txt` from `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_load(dir: *const c_char, out: *mut *mut GsGraph) -> GsStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let g = GraphFiles::in_dir(Path::new(dir)).load()?;
        put(out, GsGraph(g))
    })
}

/// Generates a stochastic-block-model graph with `num_classes` blocks.
///
/// # Safety
/// `sizes` must point to `num_classes` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_sbm(
    sizes: *const usize,
    num_classes: usize,
    p_in: f64,
    p_out: f64,
    dim: usize,
    seed: u64,
    out: *mut *mut GsGraph,
) -> GsStatus {
    guard(|| {
        if sizes.is_null() {
            return Err(Failure::null("sizes"));
        }
        let sizes = std::slice::from_raw_parts(sizes, num_classes).to_vec();
        let g = generate_sbm_graph(&SbmConfig::new(sizes, p_in, p_out, dim, seed))?;
        put(out, GsGraph(g))
    })
}

/// # Safety
/// `g` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn gs_graph_num_nodes(g: *const GsGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_nodes())
}

/// # Safety
/// `g` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn gs_graph_num_classes(g: *const GsGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_classes())
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_free(g: *mut GsGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Training configuration with default values.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_config_new(out: *mut *mut GsConfig) -> GsStatus {
    guard(|| put(out, GsConfig(TrainConfig::default())))
}

/// Sets one training key, using the names of the configuration file
/// (`variant`, `lambda`, `max_epochs`, ...).
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gs_config_set(cfg: *mut GsConfig, key: *const c_char, value: *const c_char) -> GsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| Failure::null("cfg"))?;
        let (key, value) = (str_arg(key, "key")?, str_arg(value, "value")?);
        if apply_train_key(&mut cfg.0, key, value)? {
            Ok(())
        } else {
            Err(Failure::invalid(format!("unknown training key `{key}`")))
        }
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_config_free(cfg: *mut GsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Trains on a stratified split drawn from the configured seed; the rest of
/// the labeled nodes after train and validation form the test set.
///
/// # Safety
/// `g` and `cfg` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_train(
    g: *const GsGraph,
    cfg: *const GsConfig,
    train_fraction: f64,
    val_fraction: f64,
    out: *mut *mut GsRun,
) -> GsStatus {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        let cfg = ref_arg(cfg, "cfg")?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.0.seed);
        let masks = stratified_split(&g.0, train_fraction, val_fraction, &mut rng)?;
        let output = train(&g.0, &masks, &cfg.0)?;
        put(out, GsRun { output, masks })
    })
}

/// Test-set metrics of the best checkpoint.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_run_test_metrics(run: *const GsRun, out: *mut GsMetrics) -> GsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        *out = GsMetrics::from(&run.output.record.test);
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn gs_run_num_epochs(run: *const GsRun) -> usize {
    run.as_ref().map_or(0, |r| r.output.record.epochs.len())
}

/// Number of test nodes in the run's split.
///
/// # Safety
/// `run` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn gs_run_num_test(run: *const GsRun) -> usize {
    run.as_ref().map_or(0, |r| r.masks.test().len())
}

/// Copies the `nodes × classes` probability matrix, row-major, into `buf`.
/// `len` is the capacity of `buf` in elements.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_run_probabilities(run: *const GsRun, buf: *mut f64, len: usize) -> GsStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        let p = run.output.probabilities.as_slice();
        if len < p.len() {
            return Err(Failure::invalid(format!("buffer holds {len} values, need {}", p.len())));
        }
        ptr::copy_nonoverlapping(p.as_ptr(), buf, p.len());
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_run_free(run: *mut GsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Scores an `n × m` row-major probability matrix against `labels`; a
/// negative label marks a node to leave out.
///
/// # Safety
/// `probs` must hold `n * m` doubles, `labels` `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gs_metrics_compute(
    probs: *const f64,
    n: usize,
    m: usize,
    labels: *const i64,
    out: *mut GsMetrics,
) -> GsStatus {
    guard(|| {
        if probs.is_null() || labels.is_null() {
            return Err(Failure::null("probs or labels"));
        }
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        if m == 0 {
            return Err(Failure::invalid("no classes"));
        }
        let p = Mat::from_vec(n, m, std::slice::from_raw_parts(probs, n * m).to_vec())
            .map_err(|e| Failure::invalid(e.to_string()))?;
        let raw = std::slice::from_raw_parts(labels, n);
        let mut y = Vec::with_capacity(n);
        for (v, &l) in raw.iter().enumerate() {
            y.push(match usize::try_from(l) {
                Ok(c) if c < m => Some(c),
                Ok(c) => return Err(Failure::invalid(format!("label {c} of node {v} out of range"))),
                Err(_) => None,
            });
        }
        let mask: Vec<usize> = (0..n).filter(|&v| y[v].is_some()).collect();
        *out = GsMetrics::from(&MetricsReport::compute(&p, &y, &mask));
        Ok(())
    })
}
