//! Flat `key = value` configuration documents.

use std::path::{Path, PathBuf};

use super::{DatasetSource, ExperimentSpec, Split, SweepAxis};
use crate::autodiff::Aggregation;
use crate::edge::EdgeActivation;
use crate::graph::SbmConfig;
use crate::train::{EdgePairs, NeighborPool, TrainConfig, Variant};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {msg}")]
    Value { key: String, value: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Ordered `(key, value)` pairs; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pairs(&text)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        msg: e.to_string(),
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.into(),
            value: value.into(),
            msg: "expected true or false".into(),
        }),
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, t)| t)
        .ok_or_else(|| ConfigError::Value {
            key: key.into(),
            value: value.into(),
            msg: format!(
                "expected one of {}",
                options.iter().map(|o| o.0).collect::<Vec<_>>().join(", ")
            ),
        })
}

/// Applies one training key; `Ok(false)` if the key is not a training key.
pub fn apply_train_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<bool, ConfigError> {
    match key {
        "variant" => cfg.variant = parse(key, value)?,
        "lambda" => cfg.lambda = parse(key, value)?,
        "eta" => cfg.eta = parse(key, value)?,
        "lr" => cfg.lr = parse(key, value)?,
        "weight_decay" => cfg.weight_decay = parse(key, value)?,
        "max_epochs" => cfg.max_epochs = parse(key, value)?,
        "patience" => cfg.patience = parse(key, value)?,
        "pretrain_max_epochs" => cfg.pretrain_max_epochs = parse(key, value)?,
        "pretrain_patience" => cfg.pretrain_patience = parse(key, value)?,
        "pretrain_min_delta" => cfg.pretrain_min_delta = parse(key, value)?,
        "scale" => cfg.scale = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "aggregation" => {
            cfg.aggregation = choice(key, value, &[("mean", Aggregation::Mean), ("sum", Aggregation::Sum)])?
        }
        "edge_activation" => {
            cfg.edge_activation = choice(
                key,
                value,
                &[
                    ("sigmoid", EdgeActivation::Sigmoid),
                    ("row_softmax", EdgeActivation::RowSoftmax),
                ],
            )?
        }
        "relu_logits" => cfg.relu_logits = parse_bool(key, value)?,
        "k" => cfg.k = parse(key, value)?,
        "k2" => cfg.k2 = parse(key, value)?,
        "minority_classes" => {
            cfg.minority_classes = if value.is_empty() || value == "auto" {
                None
            } else {
                Some(parse_list(key, value)?)
            }
        }
        "neighbor_pool" => {
            cfg.neighbor_pool = choice(
                key,
                value,
                &[("train", NeighborPool::Train), ("train_val", NeighborPool::TrainVal)],
            )?
        }
        "edge_pairs" => {
            cfg.edge_pairs = match value {
                "dense" => EdgePairs::Dense,
                "sampled" => EdgePairs::Sampled {
                    negatives_per_edge: match cfg.edge_pairs {
                        EdgePairs::Sampled { negatives_per_edge } => negatives_per_edge,
                        EdgePairs::Dense => 5,
                    },
                },
                _ => return Err(choice::<()>(key, value, &[("dense", ()), ("sampled", ())]).unwrap_err()),
            }
        }
        "negatives_per_edge" => {
            cfg.edge_pairs = EdgePairs::Sampled {
                negatives_per_edge: parse(key, value)?,
            }
        }
        "dense_node_cap" => cfg.dense_node_cap = parse(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn sbm(spec: &mut ExperimentSpec) -> &mut SbmConfig {
    if !matches!(spec.dataset, DatasetSource::Sbm(_)) {
        spec.dataset = DatasetSource::Sbm(SbmConfig::new(vec![200, 200, 200, 20], 0.05, 0.005, 16, 0));
    }
    match &mut spec.dataset {
        DatasetSource::Sbm(c) => c,
        DatasetSource::Files(_) => unreachable!(),
    }
}

/// Applies one key to the experiment or to its base training config.
pub fn apply_key(spec: &mut ExperimentSpec, key: &str, value: &str) -> Result<(), ConfigError> {
    if apply_train_key(&mut spec.base, key, value)? {
        if key == "variant" {
            spec.variants = vec![spec.base.variant];
        }
        if key == "seed" {
            spec.seeds = vec![spec.base.seed];
        }
        return Ok(());
    }
    match key {
        "data_dir" => spec.dataset = DatasetSource::Files(PathBuf::from(value)),
        "sbm_sizes" => sbm(spec).class_sizes = parse_list(key, value)?,
        "sbm_p_in" => sbm(spec).p_in = parse(key, value)?,
        "sbm_p_out" => sbm(spec).p_out = parse(key, value)?,
        "sbm_dim" => sbm(spec).dim = parse(key, value)?,
        "sbm_seed" => sbm(spec).seed = parse(key, value)?,
        "sbm_mean_scale" => sbm(spec).mean_scale = parse(key, value)?,
        "sbm_noise" => sbm(spec).noise = parse(key, value)?,
        "split" => {
            spec.split = match value {
                "stratified" => Split::default_stratified(),
                "artificial" => Split::default_artificial(),
                _ => {
                    return Err(ConfigError::Value {
                        key: key.into(),
                        value: value.into(),
                        msg: "expected stratified or artificial".into(),
                    })
                }
            }
        }
        "train_fraction" | "val_fraction" | "ratio" | "majority_train_size" | "minority_count" => {
            apply_split_key(&mut spec.split, key, value)?
        }
        "sweep" => {
            spec.sweep_axis = choice(
                key,
                value,
                &[
                    ("none", SweepAxis::None),
                    ("scale", SweepAxis::Scale),
                    ("ratio", SweepAxis::Ratio),
                    ("lambda", SweepAxis::Lambda),
                ],
            )?
        }
        "sweep_values" => {
            spec.sweep_values = value
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        }
        "variants" => {
            spec.variants = if value == "all" {
                Variant::ALL.to_vec()
            } else {
                parse_list(key, value)?
            }
        }
        "seeds" => spec.seeds = parse_seeds(key, value)?,
        "output" => spec.output = PathBuf::from(value),
        "workers" => spec.workers = parse(key, value)?,
        "dump_predictions" => spec.dump_predictions = parse_bool(key, value)?,
        "log_synthetic" => spec.log_synthetic = parse_bool(key, value)?,
        "save_checkpoints" => spec.save_checkpoints = parse_bool(key, value)?,
        _ => return Err(ConfigError::UnknownKey(key.into())),
    }
    Ok(())
}

/// `0,1,2` or a range `0..3`.
fn parse_seeds(key: &str, value: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some((a, b)) = value.split_once("..") {
        let (a, b): (u64, u64) = (parse(key, a.trim())?, parse(key, b.trim())?);
        return Ok((a..b).collect());
    }
    parse_list(key, value)
}

fn apply_split_key(split: &mut Split, key: &str, value: &str) -> Result<(), ConfigError> {
    match (split, key) {
        (Split::Stratified { train_fraction, .. }, "train_fraction") => *train_fraction = parse(key, value)?,
        (Split::Stratified { val_fraction, .. }, "val_fraction") => *val_fraction = parse(key, value)?,
        (Split::Artificial { val_fraction, .. }, "val_fraction") => *val_fraction = parse(key, value)?,
        (Split::Artificial { ratio, .. }, "ratio") => *ratio = parse(key, value)?,
        (
            Split::Artificial {
                majority_train_size, ..
            },
            "majority_train_size",
        ) => *majority_train_size = parse(key, value)?,
        (Split::Artificial { minority_count, .. }, "minority_count") => *minority_count = parse(key, value)?,
        (_, _) => {
            return Err(ConfigError::Invalid(format!(
                "`{key}` does not apply to the selected split; set `split` first"
            )))
        }
    }
    Ok(())
}
