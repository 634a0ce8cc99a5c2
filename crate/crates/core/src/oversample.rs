//! Synthetic minority oversampling at any representation level, plus the
//! sampling baselines that operate on the raw graph.
//!
//! A synthetic node interpolates a seed node `v` of a minority class with its
//! nearest same-class neighbor: `(1 − δ)·h_v + δ·h_nn(v)`, `δ ~ U[0, 1]`.
//! The same routine serves the latent encoder space, the raw feature space
//! and the last hidden layer.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Interpolation, Mat};
use crate::graph::{ClassStats, Graph, SplitMasks};

/// How many synthetic nodes to create per class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OversampleScale {
    /// `round(|C_c| × scale)` for each minority class.
    Fixed(f64),
    /// `max_i |C_i| − |C_c|` for every class.
    Balance,
}

impl fmt::Display for OversampleScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OversampleScale::Fixed(s) => write!(f, "{s}"),
            OversampleScale::Balance => f.write_str("balance"),
        }
    }
}

impl FromStr for OversampleScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("balance") {
            return Ok(Self::Balance);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(Self::Fixed(v)),
            _ => Err(format!(
                "over-sampling scale must be a non-negative number or `balance`, got `{s}`"
            )),
        }
    }
}

/// Per-class synthetic node counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub counts: Vec<usize>,
}

impl SamplingPlan {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

pub fn plan_from_scale(stats: &ClassStats, scale: OversampleScale, minority: &[usize]) -> SamplingPlan {
    let counts = match scale {
        OversampleScale::Balance => {
            let max = stats.max_size();
            stats.sizes.iter().map(|&s| max - s).collect()
        }
        OversampleScale::Fixed(f) => (0..stats.num_classes())
            .map(|c| {
                if minority.contains(&c) {
                    (stats.sizes[c] as f64 * f).round() as usize
                } else {
                    0
                }
            })
            .collect(),
    };
    SamplingPlan { counts }
}

/// Training nodes grouped by class; the candidate set for seed selection and
/// nearest-neighbor search.
#[derive(Clone, Debug)]
pub struct ClassPool {
    by_class: Vec<Vec<usize>>,
}

impl ClassPool {
    pub fn new(labels: &[Option<usize>], nodes: &[usize], num_classes: usize) -> Self {
        let mut by_class = vec![Vec::new(); num_classes];
        for &v in nodes {
            if let Some(c) = labels[v] {
                by_class[c].push(v);
            }
        }
        for list in &mut by_class {
            list.sort_unstable();
            list.dedup();
        }
        Self { by_class }
    }

    pub fn from_masks(g: &Graph, masks: &SplitMasks) -> Self {
        Self::new(g.labels(), masks.train(), g.num_classes())
    }

    /// Pool over train, validation and test labeled nodes.
    pub fn all_labeled(g: &Graph) -> Self {
        let all: Vec<usize> = (0..g.num_nodes()).collect();
        Self::new(g.labels(), &all, g.num_classes())
    }

    pub fn class(&self, c: usize) -> &[usize] {
        &self.by_class[c]
    }

    pub fn num_classes(&self) -> usize {
        self.by_class.len()
    }
}

/// Nearest row to `v` by Euclidean distance among `candidates`, excluding
/// `v` itself. Ties go to the smallest id. With no other candidate, returns
/// `v`.
pub fn nearest_among(h: &Mat, v: usize, candidates: &[usize]) -> usize {
    let hv = h.row(v);
    let mut best: Option<(f64, usize)> = None;
    for &u in candidates {
        if u == v {
            continue;
        }
        let d: f64 = h.row(u).iter().zip(hv).map(|(a, b)| (a - b) * (a - b)).sum();
        let better = match best {
            None => true,
            Some((bd, bu)) => d < bd || (d == bd && u < bu),
        };
        if better {
            best = Some((d, u));
        }
    }
    best.map_or(v, |(_, u)| u)
}

/// Nearest same-class node to `v` within `pool`.
pub fn nearest_same_class(h: &Mat, v: usize, labels: &[Option<usize>], pool: &ClassPool) -> usize {
    match labels[v] {
        Some(c) => nearest_among(h, v, pool.class(c)),
        None => v,
    }
}

/// Synthetic nodes with the provenance needed to replay them.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticBatch {
    pub embeddings: Mat,
    pub labels: Vec<usize>,
    pub parents: Vec<(usize, usize)>,
    pub deltas: Vec<f64>,
}

impl SyntheticBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn interpolations(&self) -> Vec<Interpolation> {
        self.parents
            .iter()
            .zip(&self.deltas)
            .map(|(&(base, neighbor), &delta)| Interpolation { base, neighbor, delta })
            .collect()
    }

    /// Appends `epoch,class,v,nn,delta` rows.
    pub fn write_log<W: Write>(&self, mut w: W, epoch: usize) -> std::io::Result<()> {
        for ((c, (v, nn)), d) in self.labels.iter().zip(&self.parents).zip(&self.deltas) {
            writeln!(w, "{epoch},{c},{v},{nn},{d:e}")?;
        }
        Ok(())
    }
}

/// Draws the synthetic nodes for `plan` in class order. For every node: a seed
/// drawn uniformly with replacement from its class pool, then `δ`.
pub fn smote_interpolate<R: Rng + ?Sized>(
    h: &Mat,
    plan: &SamplingPlan,
    pool: &ClassPool,
    rng: &mut R,
) -> SyntheticBatch {
    smote_interpolate_with(h, plan, pool, pool, rng)
}

/// As [`smote_interpolate`], with seeds from `seeds` and nearest neighbors
/// searched in `neighbors`.
pub fn smote_interpolate_with<R: Rng + ?Sized>(
    h: &Mat,
    plan: &SamplingPlan,
    seeds: &ClassPool,
    neighbors: &ClassPool,
    rng: &mut R,
) -> SyntheticBatch {
    let total = plan.total();
    let mut labels = Vec::with_capacity(total);
    let mut parents = Vec::with_capacity(total);
    let mut deltas = Vec::with_capacity(total);
    let mut nn_cache: HashMap<usize, usize> = HashMap::new();
    for (c, &count) in plan.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let members = seeds.class(c);
        let candidates = neighbors.class(c);
        if members.is_empty() {
            warn!("class {c} has no pool nodes; skipping {count} synthetic nodes");
            continue;
        }
        if candidates.len() <= 1 {
            warn!("class {c} has a single pool node; synthetic nodes duplicate it");
        }
        for _ in 0..count {
            let v = members[rng.gen_range(0..members.len())];
            let delta: f64 = rng.gen_range(0.0..=1.0);
            let nn = *nn_cache.entry(v).or_insert_with(|| nearest_among(h, v, candidates));
            labels.push(c);
            parents.push((v, nn));
            deltas.push(delta);
        }
    }
    let mut embeddings = Mat::zeros(labels.len(), h.cols());
    for (i, (&(v, nn), &d)) in parents.iter().zip(&deltas).enumerate() {
        for ((o, a), b) in embeddings.row_mut(i).iter_mut().zip(h.row(v)).zip(h.row(nn)) {
            *o = (1.0 - d) * a + d * b;
        }
    }
    SyntheticBatch {
        embeddings,
        labels,
        parents,
        deltas,
    }
}

/// `weight_c = |train| / (m · |C_c|)`.
pub fn reweight_vector(stats: &ClassStats) -> Vec<f64> {
    let total = stats.total() as f64;
    let m = stats.num_classes() as f64;
    stats.sizes.iter().map(|&s| total / (m * s as f64)).collect()
}

fn extend_graph(
    g: &Graph,
    masks: &SplitMasks,
    sources: &[usize],
    new_features: Mat,
    new_labels: &[usize],
) -> (Graph, SplitMasks) {
    let n = g.num_nodes();
    let adjacency = g.adjacency().with_copied_nodes(sources);
    let features = g.features().vcat(&new_features).expect("feature widths match");
    let mut labels = g.labels().to_vec();
    labels.extend(new_labels.iter().map(|&c| Some(c)));
    let graph = Graph::new(adjacency, features, labels, g.num_classes()).expect("extension keeps invariants");
    let masks = masks.with_extra_train(n..n + sources.len());
    (graph, masks)
}

fn draw_seeds<R: Rng + ?Sized>(plan: &SamplingPlan, pool: &ClassPool, rng: &mut R) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(plan.total());
    for (c, &count) in plan.counts.iter().enumerate() {
        let members = pool.class(c);
        if members.is_empty() {
            continue;
        }
        for _ in 0..count {
            out.push((c, members[rng.gen_range(0..members.len())]));
        }
    }
    out
}

/// Over-sampling baseline: copies minority training nodes together with
/// their feature rows and incident edges.
pub fn baseline_duplicate<R: Rng + ?Sized>(
    g: &Graph,
    masks: &SplitMasks,
    plan: &SamplingPlan,
    rng: &mut R,
) -> (Graph, SplitMasks) {
    let pool = ClassPool::from_masks(g, masks);
    let seeds = draw_seeds(plan, &pool, rng);
    let sources: Vec<usize> = seeds.iter().map(|&(_, v)| v).collect();
    let labels: Vec<usize> = seeds.iter().map(|&(c, _)| c).collect();
    let features = g.features().select_rows(&sources);
    extend_graph(g, masks, &sources, features, &labels)
}

/// SMOTE baseline in raw feature space; each new node copies the edges of
/// its seed node.
pub fn baseline_raw_smote<R: Rng + ?Sized>(
    g: &Graph,
    masks: &SplitMasks,
    plan: &SamplingPlan,
    rng: &mut R,
) -> (Graph, SplitMasks, SyntheticBatch) {
    let pool = ClassPool::from_masks(g, masks);
    let batch = smote_interpolate(g.features(), plan, &pool, rng);
    let sources: Vec<usize> = batch.parents.iter().map(|&(v, _)| v).collect();
    let (graph, masks) = extend_graph(g, masks, &sources, batch.embeddings.clone(), &batch.labels);
    (graph, masks, batch)
}
