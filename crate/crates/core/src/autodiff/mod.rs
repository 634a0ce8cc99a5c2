//! Dense matrices, a reverse-mode tape over them, and Adam.

mod mat;
mod params;
mod tape;

pub use mat::Mat;
pub use params::{AdamConfig, ParamId, ParamStore};
pub use tape::{logistic, Aggregation, Gradients, Interpolation, LossTarget, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: dimension mismatch ({detail})")]
    Shape { op: &'static str, detail: String },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward needs a scalar loss, got a {rows}x{cols} value")]
    NotScalar { rows: usize, cols: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
