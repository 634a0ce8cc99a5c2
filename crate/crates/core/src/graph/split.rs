use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError};

/// Disjoint train/validation/test node sets, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

impl SplitMasks {
    pub fn new(n: usize, mut train: Vec<usize>, mut val: Vec<usize>, mut test: Vec<usize>) -> Result<Self, GraphError> {
        if train.is_empty() {
            return Err(GraphError::Invalid("empty training set".into()));
        }
        let mut seen = vec![false; n];
        for set in [&mut train, &mut val, &mut test] {
            set.sort_unstable();
            for &v in set.iter() {
                if v >= n {
                    return Err(GraphError::Invalid(format!("mask id {v} >= {n}")));
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(GraphError::Invalid(format!("node {v} appears in more than one mask")));
                }
            }
        }
        Ok(Self { train, val, test })
    }

    /// Checks that every masked node carries a label.
    pub fn validate_against(&self, g: &Graph) -> Result<(), GraphError> {
        let n = g.num_nodes();
        for &v in self.train.iter().chain(&self.val).chain(&self.test) {
            if v >= n {
                return Err(GraphError::Invalid(format!("mask id {v} >= {n}")));
            }
            if g.label(v).is_none() {
                return Err(GraphError::Invalid(format!("masked node {v} is unlabeled")));
            }
        }
        Ok(())
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn val(&self) -> &[usize] {
        &self.val
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// Appends freshly created nodes to the training set.
    pub(crate) fn with_extra_train(&self, extra: impl IntoIterator<Item = usize>) -> Self {
        let mut train = self.train.clone();
        train.extend(extra);
        train.sort_unstable();
        Self {
            train,
            val: self.val.clone(),
            test: self.test.clone(),
        }
    }
}

/// Per-class labeled training counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub sizes: Vec<usize>,
    pub imbalance_ratio: f64,
}

impl ClassStats {
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self, GraphError> {
        if let Some(class) = sizes.iter().position(|&s| s == 0) {
            return Err(GraphError::EmptyClass { class });
        }
        let min = *sizes
            .iter()
            .min()
            .ok_or_else(|| GraphError::Invalid("no classes".into()))?;
        let max = *sizes.iter().max().expect("nonempty");
        Ok(Self {
            imbalance_ratio: min as f64 / max as f64,
            sizes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    /// Classes strictly smaller than the largest one.
    pub fn minority_classes(&self) -> Vec<usize> {
        let max = self.max_size();
        (0..self.sizes.len()).filter(|&c| self.sizes[c] < max).collect()
    }
}

/// `min |C_i| / max |C_i|` over labeled training nodes.
pub fn imbalance_ratio(g: &Graph, masks: &SplitMasks) -> Result<ClassStats, GraphError> {
    let mut sizes = vec![0usize; g.num_classes()];
    for &v in masks.train() {
        match g.label(v) {
            Some(c) => sizes[c] += 1,
            None => return Err(GraphError::Invalid(format!("train node {v} is unlabeled"))),
        }
    }
    ClassStats::from_sizes(sizes)
}

/// Down-sampling protocol: every majority class keeps `majority_train_size`
/// training nodes, every minority class `round(majority_train_size * ratio)`.
/// Remaining labeled nodes are shuffled and split into validation
/// (`val_fraction`) and test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceConfig {
    pub minority_classes: Vec<usize>,
    pub ratio: f64,
    pub majority_train_size: usize,
    pub val_fraction: f64,
}

impl ImbalanceConfig {
    pub fn minority_train_size(&self) -> usize {
        (self.majority_train_size as f64 * self.ratio).round() as usize
    }
}

/// Picks `count` distinct classes out of `0..m`, returned ascending.
pub fn select_minority_classes<R: Rng + ?Sized>(m: usize, count: usize, rng: &mut R) -> Vec<usize> {
    let mut classes: Vec<usize> = (0..m).collect();
    classes.shuffle(rng);
    let mut picked: Vec<usize> = classes.into_iter().take(count.min(m)).collect();
    picked.sort_unstable();
    picked
}

pub fn make_artificial_imbalance(g: &Graph, cfg: &ImbalanceConfig, seed: u64) -> Result<SplitMasks, GraphError> {
    make_artificial_imbalance_with_rng(g, cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn make_artificial_imbalance_with_rng<R: Rng + ?Sized>(
    g: &Graph,
    cfg: &ImbalanceConfig,
    rng: &mut R,
) -> Result<SplitMasks, GraphError> {
    if !(cfg.ratio > 0.0 && cfg.ratio <= 1.0) {
        return Err(GraphError::Invalid(format!(
            "imbalance ratio {} outside (0, 1]",
            cfg.ratio
        )));
    }
    if !(0.0..=1.0).contains(&cfg.val_fraction) {
        return Err(GraphError::Invalid(format!(
            "validation fraction {} outside [0, 1]",
            cfg.val_fraction
        )));
    }
    let minority_size = cfg.minority_train_size();
    if minority_size == 0 {
        return Err(GraphError::Invalid(format!(
            "{} x {} rounds to zero minority training nodes",
            cfg.majority_train_size, cfg.ratio
        )));
    }
    if let Some(&c) = cfg.minority_classes.iter().find(|&&c| c >= g.num_classes()) {
        return Err(GraphError::Invalid(format!(
            "minority class {c} >= {}",
            g.num_classes()
        )));
    }
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for c in 0..g.num_classes() {
        let want = if cfg.minority_classes.contains(&c) {
            minority_size
        } else {
            cfg.majority_train_size
        };
        let mut nodes = g.nodes_of_class(c);
        if nodes.len() < want {
            return Err(GraphError::InsufficientLabels {
                class: c,
                available: nodes.len(),
                requested: want,
            });
        }
        nodes.shuffle(rng);
        train.extend_from_slice(&nodes[..want]);
        rest.extend_from_slice(&nodes[want..]);
    }
    rest.sort_unstable();
    rest.shuffle(rng);
    let n_val = (rest.len() as f64 * cfg.val_fraction).round() as usize;
    let test = rest.split_off(n_val);
    SplitMasks::new(g.num_nodes(), train, rest, test)
}

/// Per-class split of labeled nodes by fractions; every class keeps at least
/// one training node.
pub fn stratified_split<R: Rng + ?Sized>(
    g: &Graph,
    train_fraction: f64,
    val_fraction: f64,
    rng: &mut R,
) -> Result<SplitMasks, GraphError> {
    if train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0 {
        return Err(GraphError::Invalid(format!(
            "bad split fractions train={train_fraction} val={val_fraction}"
        )));
    }
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..g.num_classes() {
        let mut nodes = g.nodes_of_class(c);
        if nodes.is_empty() {
            return Err(GraphError::EmptyClass { class: c });
        }
        nodes.shuffle(rng);
        let size = nodes.len() as f64;
        let n_train = ((size * train_fraction).round() as usize).clamp(1, nodes.len());
        let n_val = ((size * val_fraction).round() as usize).min(nodes.len() - n_train);
        train.extend_from_slice(&nodes[..n_train]);
        val.extend_from_slice(&nodes[n_train..n_train + n_val]);
        test.extend_from_slice(&nodes[n_train + n_val..]);
    }
    SplitMasks::new(g.num_nodes(), train, val, test)
}
