//! One GraphSage block producing the intermediate embedding space.
//!
//! `H¹[v] = relu([F[v] | agg_{u ∈ N(v)} F[u]] · W¹)`, with `W¹` of shape
//! `2d × k`. Isolated nodes get a zero aggregate.

use crate::autodiff::{Aggregation, Mat, Tape, TensorError, Var};
use crate::graph::Graph;

/// `[F | agg(A, F)]` for a fixed graph. Features are constant during
/// training, so this is computed once per graph.
#[derive(Clone, Debug)]
pub struct EncoderInput {
    x: Mat,
}

impl EncoderInput {
    pub fn new(g: &Graph, agg: Aggregation) -> Result<Self, TensorError> {
        let mut t = Tape::new();
        let f = t.constant(g.features().clone());
        let a = t.aggregate(g.adjacency(), None, f, agg)?;
        let x = g.features().hcat(t.value(a))?;
        Ok(Self { x })
    }

    pub fn matrix(&self) -> &Mat {
        &self.x
    }
}

pub fn encode(tape: &mut Tape, input: &EncoderInput, w1: Var) -> Result<Var, TensorError> {
    let x = tape.constant(input.x.clone());
    let z = tape.matmul(x, w1)?;
    tape.relu(z)
}

/// Value-level encoder for inference and inspection.
pub fn encode_graph(g: &Graph, w1: &Mat, agg: Aggregation) -> Result<Mat, TensorError> {
    let input = EncoderInput::new(g, agg)?;
    let mut t = Tape::new();
    let w = t.constant(w1.clone());
    let h = encode(&mut t, &input, w)?;
    Ok(t.value(h).clone())
}
