//! Bilinear edge generator and augmented-graph assembly.
//!
//! Pair scores are `logistic(h_v · S_sym · h_u)` with `S_sym = (S + Sᵀ)/2`.
//! The generator is fit to the real adjacency with an unnormalized squared
//! reconstruction loss, then used to connect synthetic nodes to real ones:
//! either by thresholding the scores (no gradient through the result) or by
//! keeping them as soft, differentiable edge weights.

use std::rc::Rc;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{logistic, Mat, Tape, TensorError, Var};
use crate::graph::Adjacency;

/// Squashing applied to the bilinear pair form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeActivation {
    #[default]
    Sigmoid,
    /// Softmax across each row of the score matrix.
    RowSoftmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EdgeMode {
    Thresholded { eta: f64 },
    Soft,
}

#[derive(Debug, thiserror::Error)]
pub enum EdgeError {
    #[error(
        "dense edge loss over {n} nodes exceeds the cap of {cap}; \
         enable pair sampling (`edge_pairs = sampled`) or raise `dense_node_cap`"
    )]
    NodeCap { n: usize, cap: usize },
    #[error("threshold eta = {0} outside [0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Default largest graph for which the dense `n × n` loss is built.
pub const DEFAULT_DENSE_NODE_CAP: usize = 5_000;

/// What the reconstruction loss compares against.
#[derive(Clone, Debug)]
pub enum EdgeTarget {
    /// Every ordered real pair, including the diagonal.
    Dense(Rc<Mat>),
    /// A fixed list of pairs with 0/1 targets.
    Sampled {
        pairs: Rc<[(usize, usize)]>,
        targets: Rc<Mat>,
    },
}

impl EdgeTarget {
    pub fn dense(adj: &Adjacency, cap: usize) -> Result<Self, EdgeError> {
        let n = adj.num_nodes();
        if n > cap {
            return Err(EdgeError::NodeCap { n, cap });
        }
        Ok(Self::Dense(Rc::new(adj.to_dense())))
    }

    /// Every edge in both directions plus `negatives_per_edge` uniformly drawn
    /// ordered pairs per directed edge; drawn pairs keep their true target.
    pub fn sampled<R: Rng + ?Sized>(adj: &Adjacency, negatives_per_edge: usize, rng: &mut R) -> Self {
        let n = adj.num_nodes();
        let mut pairs = Vec::new();
        for v in 0..n {
            for &u in adj.neighbors(v) {
                pairs.push((v, u));
            }
        }
        let positives = pairs.len();
        if n > 0 {
            for _ in 0..positives * negatives_per_edge {
                pairs.push((rng.gen_range(0..n), rng.gen_range(0..n)));
            }
        }
        let targets = pairs
            .iter()
            .map(|&(v, u)| if adj.contains(v, u) { 1.0 } else { 0.0 })
            .collect();
        Self::Sampled {
            targets: Rc::new(Mat::from_vec(pairs.len(), 1, targets).expect("column")),
            pairs: pairs.into(),
        }
    }
}

/// `(S + Sᵀ) / 2` on the tape.
pub fn symmetric_interaction(tape: &mut Tape, s: Var) -> Result<Var, TensorError> {
    let st = tape.transpose(s)?;
    let sum = tape.add(s, st)?;
    tape.scale(sum, 0.5)
}

/// Value-level score of a single pair.
pub fn edge_score(h: &Mat, s: &Mat, v: usize, u: usize) -> f64 {
    let (hv, hu) = (h.row(v), h.row(u));
    let k = s.rows();
    let mut form = 0.0;
    for (i, &a) in hv.iter().enumerate().take(k) {
        for (j, &b) in hu.iter().enumerate().take(k) {
            form += a * 0.5 * (s.get(i, j) + s.get(j, i)) * b;
        }
    }
    logistic(form)
}

/// `act(left · S_sym · rightᵀ)`.
pub fn score_matrix(
    tape: &mut Tape,
    left: Var,
    s_sym: Var,
    right: Var,
    act: EdgeActivation,
) -> Result<Var, TensorError> {
    let ls = tape.matmul(left, s_sym)?;
    let rt = tape.transpose(right)?;
    let z = tape.matmul(ls, rt)?;
    match act {
        EdgeActivation::Sigmoid => tape.sigmoid(z),
        EdgeActivation::RowSoftmax => tape.row_softmax(z),
    }
}

/// `‖E − A‖²_F` over real nodes, summed (not averaged).
pub fn edge_loss(
    tape: &mut Tape,
    h: Var,
    s: Var,
    target: &EdgeTarget,
    act: EdgeActivation,
) -> Result<Var, TensorError> {
    let s_sym = symmetric_interaction(tape, s)?;
    match target {
        EdgeTarget::Dense(a) => {
            let e = score_matrix(tape, h, s_sym, h, act)?;
            tape.frobenius_sq_diff(e, Rc::clone(a))
        }
        EdgeTarget::Sampled { pairs, targets } => {
            let left: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let right: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let hl = tape.select_rows(h, &left)?;
            let hr = tape.select_rows(h, &right)?;
            let hls = tape.matmul(hl, s_sym)?;
            let z = tape.row_dot(hls, hr)?;
            let e = tape.sigmoid(z)?;
            tape.frobenius_sq_diff(e, Rc::clone(targets))
        }
    }
}

/// Real graph extended with synthetic nodes.
///
/// The full adjacency is `[[A, Bᵀ], [B, 0]]`: `A` is the real sparse block,
/// `B` (s × n) the synthetic-to-real weights. Synthetic-synthetic pairs are
/// never connected.
#[derive(Clone, Debug)]
pub struct AugmentedGraph {
    pub h1: Var,
    pub adjacency: Arc<Adjacency>,
    pub synthetic_edges: Option<Var>,
    pub labels: Vec<Option<usize>>,
    pub num_real: usize,
    pub mode: Option<EdgeMode>,
}

impl AugmentedGraph {
    /// No synthetic nodes.
    pub fn plain(h1: Var, adjacency: Arc<Adjacency>, labels: Vec<Option<usize>>) -> Self {
        let num_real = adjacency.num_nodes();
        Self {
            h1,
            adjacency,
            synthetic_edges: None,
            labels,
            num_real,
            mode: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_synthetic(&self) -> usize {
        self.num_nodes() - self.num_real
    }

    /// Materializes `Ã` as a dense matrix.
    pub fn dense_adjacency(&self, tape: &Tape) -> Mat {
        let n = self.num_real;
        let total = self.num_nodes();
        let mut out = Mat::zeros(total, total);
        for v in 0..n {
            for &u in self.adjacency.neighbors(v) {
                out.set(v, u, 1.0);
            }
        }
        if let Some(b) = self.synthetic_edges {
            let b = tape.value(b);
            for j in 0..b.rows() {
                for u in 0..n {
                    out.set(n + j, u, b.get(j, u));
                    out.set(u, n + j, b.get(j, u));
                }
            }
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn augment(
    tape: &mut Tape,
    h_real: Var,
    h_syn: Var,
    s: Var,
    syn_labels: &[usize],
    adjacency: &Arc<Adjacency>,
    real_labels: &[Option<usize>],
    mode: EdgeMode,
    act: EdgeActivation,
) -> Result<AugmentedGraph, EdgeError> {
    let s_sym = symmetric_interaction(tape, s)?;
    let scores = score_matrix(tape, h_syn, s_sym, h_real, act)?;
    let synthetic_edges = match mode {
        EdgeMode::Soft => scores,
        EdgeMode::Thresholded { eta } => {
            let binary = tape.value(scores).map(|p| if p > eta { 1.0 } else { 0.0 });
            tape.constant(binary)
        }
    };
    let h1 = tape.concat_rows(h_real, h_syn)?;
    let mut labels = real_labels.to_vec();
    labels.extend(syn_labels.iter().map(|&c| Some(c)));
    Ok(AugmentedGraph {
        h1,
        adjacency: Arc::clone(adjacency),
        synthetic_edges: Some(synthetic_edges),
        labels,
        num_real: adjacency.num_nodes(),
        mode: Some(mode),
    })
}

/// Binary edges `Ã[v', u] = 1` iff the score exceeds `eta`; `Ã` is a
/// constant on the tape.
#[allow(clippy::too_many_arguments)]
pub fn augment_thresholded(
    tape: &mut Tape,
    h_real: Var,
    h_syn: Var,
    s: Var,
    syn_labels: &[usize],
    adjacency: &Arc<Adjacency>,
    real_labels: &[Option<usize>],
    eta: f64,
    act: EdgeActivation,
) -> Result<AugmentedGraph, EdgeError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(EdgeError::Threshold(eta));
    }
    augment(
        tape,
        h_real,
        h_syn,
        s,
        syn_labels,
        adjacency,
        real_labels,
        EdgeMode::Thresholded { eta },
        act,
    )
}

/// Soft edges `Ã[v', u] = score(v', u)`, differentiable in `S` and the
/// embeddings.
#[allow(clippy::too_many_arguments)]
pub fn augment_soft(
    tape: &mut Tape,
    h_real: Var,
    h_syn: Var,
    s: Var,
    syn_labels: &[usize],
    adjacency: &Arc<Adjacency>,
    real_labels: &[Option<usize>],
    act: EdgeActivation,
) -> Result<AugmentedGraph, EdgeError> {
    augment(
        tape,
        h_real,
        h_syn,
        s,
        syn_labels,
        adjacency,
        real_labels,
        EdgeMode::Soft,
        act,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_embedding_scores_half() {
        let h = Mat::from_rows(&[&[0.0, 0.0], &[1.0, 3.0]]);
        let s = Mat::from_rows(&[&[1.0, 2.0], &[-1.0, 0.5]]);
        assert_eq!(edge_score(&h, &s, 0, 1), 0.5);
    }

    #[test]
    fn identity_unit_vectors() {
        let h = Mat::from_rows(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let s = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let expect = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((edge_score(&h, &s, 0, 1) - expect).abs() < 1e-15);
        assert!((expect - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn score_is_symmetric_for_asymmetric_s() {
        let h = Mat::from_rows(&[&[0.3, -1.0], &[2.0, 0.7]]);
        let s = Mat::from_rows(&[&[0.1, 4.0], &[-3.0, 0.2]]);
        assert_eq!(edge_score(&h, &s, 0, 1), edge_score(&h, &s, 1, 0));
    }

    #[test]
    fn node_cap_error_mentions_sampling() {
        let adj = Adjacency::empty(10);
        let err = EdgeTarget::dense(&adj, 5).unwrap_err();
        assert!(err.to_string().contains("pair sampling"));
    }

    /// Two nodes joined by an edge, k = 1, h = (1, 2), S = 0.5:
    /// E = logistic([[0.5, 1], [1, 2]]) against A = [[0, 1], [1, 0]].
    #[test]
    fn two_node_hand_loss() {
        let mut t = Tape::new();
        let h = t.constant(Mat::from_rows(&[&[1.0], &[2.0]]));
        let s = t.constant(Mat::scalar(0.5));
        let adj = Adjacency::from_edges(2, &[(0, 1)], false);
        let target = EdgeTarget::dense(&adj, 10).unwrap();
        let l = edge_loss(&mut t, h, s, &target, EdgeActivation::Sigmoid).unwrap();
        let (e00, e01, e11) = (logistic(0.5), logistic(1.0), logistic(2.0));
        let expect = e00 * e00 + 2.0 * (e01 - 1.0) * (e01 - 1.0) + e11 * e11;
        assert!((t.value(l).get(0, 0) - expect).abs() < 1e-14);
    }

    #[test]
    fn sampled_target_contains_all_edges() {
        use rand::SeedableRng;
        let adj = Adjacency::from_edges(5, &[(0, 1), (2, 3)], false);
        let t = EdgeTarget::sampled(&adj, 2, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        let EdgeTarget::Sampled { pairs, targets } = t else {
            panic!()
        };
        assert_eq!(pairs.len(), 4 + 8);
        assert_eq!(targets.as_slice()[..4].iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn bad_eta_rejected() {
        let mut t = Tape::new();
        let h = t.constant(Mat::zeros(2, 1));
        let hs = t.constant(Mat::zeros(1, 1));
        let s = t.constant(Mat::scalar(1.0));
        let adj = Arc::new(Adjacency::empty(2));
        let err = augment_thresholded(
            &mut t,
            h,
            hs,
            s,
            &[0],
            &adj,
            &[None, None],
            1.5,
            EdgeActivation::Sigmoid,
        )
        .unwrap_err();
        assert!(matches!(err, EdgeError::Threshold(_)));
    }
}
