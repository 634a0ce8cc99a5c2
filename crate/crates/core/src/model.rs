use rand::Rng;

use crate::autodiff::{Mat, ParamId, ParamStore};

/// Layer widths: feature dim `d`, encoder width `k`, classifier block width
/// `k2`, class count `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub d: usize,
    pub k: usize,
    pub k2: usize,
    pub m: usize,
}

/// All trainable matrices of the pipeline.
///
/// * `W1` (2d × k): encoder
/// * `S` (k × k): bilinear edge generator
/// * `W2` (2k × k2) and `Wc` (2k2 × m): classifier
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub store: ParamStore,
    pub w1: ParamId,
    pub w2: ParamId,
    pub wc: ParamId,
    pub s: ParamId,
    pub dims: ModelDims,
}

impl ModelParams {
    /// Glorot-uniform initialization, drawn in the order W1, W2, Wc, S.
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        let w1 = store.insert("W1", Mat::glorot(2 * dims.d, dims.k, rng));
        let w2 = store.insert("W2", Mat::glorot(2 * dims.k, dims.k2, rng));
        let wc = store.insert("Wc", Mat::glorot(2 * dims.k2, dims.m, rng));
        let s = store.insert("S", Mat::glorot(dims.k, dims.k, rng));
        Self {
            store,
            w1,
            w2,
            wc,
            s,
            dims,
        }
    }

    /// Rebuilds from a loaded checkpoint; all four entries must be present.
    pub fn from_store(store: ParamStore) -> Option<Self> {
        let (w1, w2, wc, s) = (store.id("W1")?, store.id("W2")?, store.id("Wc")?, store.id("S")?);
        let dims = ModelDims {
            d: store.value(w1).rows() / 2,
            k: store.value(w1).cols(),
            k2: store.value(w2).cols(),
            m: store.value(wc).cols(),
        };
        let consistent = store.value(w2).rows() == 2 * dims.k
            && store.value(wc).rows() == 2 * dims.k2
            && store.value(s).shape() == (dims.k, dims.k);
        consistent.then_some(Self {
            store,
            w1,
            w2,
            wc,
            s,
            dims,
        })
    }
}
