//! Second GraphSage block and linear head over the augmented graph.
//!
//! `H² = relu([H̃¹ | agg(Ã, H̃¹)] · W²)` and
//! `P = softmax([H² | agg(Ã, H²)] · Wᶜ)`.

use crate::autodiff::{Aggregation, LossTarget, Mat, Tape, TensorError, Var};
use crate::edge::AugmentedGraph;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassifierOptions {
    pub aggregation: Aggregation,
    /// Apply ReLU to the logits before the softmax.
    pub relu_logits: bool,
}

fn block(tape: &mut Tape, aug: &AugmentedGraph, h: Var, w: Var, agg: Aggregation) -> Result<Var, TensorError> {
    let a = tape.aggregate(&aug.adjacency, aug.synthetic_edges, h, agg)?;
    let x = tape.concat_cols(h, a)?;
    tape.matmul(x, w)
}

/// `H²` for every node of `aug`.
pub fn hidden(tape: &mut Tape, aug: &AugmentedGraph, w2: Var, agg: Aggregation) -> Result<Var, TensorError> {
    let z = block(tape, aug, aug.h1, w2, agg)?;
    tape.relu(z)
}

/// Class probabilities from `H²`. `extra` rows are appended after the
/// augmented nodes with no edges, so their aggregate is zero.
pub fn head(
    tape: &mut Tape,
    aug: &AugmentedGraph,
    h2: Var,
    extra: Option<Var>,
    wc: Var,
    opts: ClassifierOptions,
) -> Result<Var, TensorError> {
    let mut z = block(tape, aug, h2, wc, opts.aggregation)?;
    if let Some(e) = extra {
        let width = tape.value(e).cols();
        let rows = tape.value(e).rows();
        let zeros = tape.constant(Mat::zeros(rows, width));
        let x = tape.concat_cols(e, zeros)?;
        let ze = tape.matmul(x, wc)?;
        z = tape.concat_rows(z, ze)?;
    }
    if opts.relu_logits {
        z = tape.relu(z)?;
    }
    tape.row_softmax(z)
}

/// `(H², P)` for the augmented graph.
pub fn classify(
    tape: &mut Tape,
    aug: &AugmentedGraph,
    w2: Var,
    wc: Var,
    opts: ClassifierOptions,
) -> Result<(Var, Var), TensorError> {
    let h2 = hidden(tape, aug, w2, opts.aggregation)?;
    let p = head(tape, aug, h2, None, wc, opts)?;
    Ok((h2, p))
}

/// Weighted cross-entropy divided by the number of targets.
/// `class_weights` of `None` means every weight is 1.
pub fn node_loss(
    tape: &mut Tape,
    p: Var,
    targets: &[(usize, usize)],
    class_weights: Option<&[f64]>,
) -> Result<Var, TensorError> {
    let rows: Vec<LossTarget> = targets
        .iter()
        .map(|&(row, class)| LossTarget {
            row,
            class,
            weight: class_weights.map_or(1.0, |w| w[class]),
        })
        .collect();
    tape.masked_cross_entropy(p, &rows, targets.len() as f64)
}

/// Argmax of a probability row; ties go to the smallest class.
pub fn predict_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = c;
        }
    }
    best
}

pub fn predict(p: &Mat, v: usize) -> usize {
    predict_row(p.row(v))
}
