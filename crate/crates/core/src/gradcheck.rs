//! Central finite-difference verification of the full training objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{Mat, ParamId, Tape};
use crate::graph::{Adjacency, Graph, SplitMasks};
use crate::model::{ModelDims, ModelParams};
use crate::oversample::OversampleScale;
use crate::train::{forward, Draw, TrainConfig, TrainContext, TrainError, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerance {
    pub step: f64,
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            step: 1e-4,
            rel: 1e-4,
            abs: 1e-6,
        }
    }
}

impl Tolerance {
    /// An entry passes if either the absolute or the relative error is small.
    pub fn accepts(&self, analytic: f64, numeric: f64) -> bool {
        let err = (analytic - numeric).abs();
        err <= self.abs || err <= self.rel * analytic.abs().max(numeric.abs())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub param: String,
    pub entries: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub failures: usize,
}

impl ParamCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub variant: Variant,
    pub seed: u64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(ParamCheck::passed)
    }
}

/// Random 8-node, 3-class graph with an imbalanced training mask
/// (train sizes 3, 2, 1).
pub fn fixture(seed: u64) -> (Graph, SplitMasks) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 8;
    let labels = [0, 0, 0, 0, 1, 1, 1, 2];
    let mut edges = vec![(0, 4), (4, 7), (7, 1)];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < 0.35 {
                edges.push((i, j));
            }
        }
    }
    let features = Mat::glorot(n, 4, &mut rng).map(|x| 2.0 * x);
    let g = Graph::new(
        Adjacency::from_edges(n, &edges, false),
        features,
        labels.iter().map(|&c| Some(c)).collect(),
        3,
    )
    .expect("valid fixture");
    let masks = SplitMasks::new(n, vec![0, 1, 2, 4, 5, 7], vec![3], vec![6]).expect("valid masks");
    (g, masks)
}

/// Small widths and a large λ so both loss terms matter.
pub fn fixture_config(variant: Variant, seed: u64) -> TrainConfig {
    TrainConfig {
        variant,
        lambda: 0.1,
        scale: OversampleScale::Balance,
        k: 5,
        k2: 4,
        seed,
        ..TrainConfig::default()
    }
}

/// Objective value with every parameter fixed and the synthetic draws
/// replayed from `draw`.
fn objective(params: &ModelParams, ctx: &TrainContext, cfg: &TrainConfig, draw: Draw<'_>) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let f = forward(&mut tape, params, ctx, cfg, draw)?;
    Ok(tape.value(f.total).get(0, 0))
}

/// Compares `∂objective/∂θ` from the tape against central differences for
/// every entry of every parameter.
pub fn check(g: &Graph, masks: &SplitMasks, cfg: &TrainConfig, tol: Tolerance) -> Result<GradCheckReport, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ctx = TrainContext::build(g, masks, cfg, &mut rng)?;
    let dims = ModelDims {
        d: g.feature_dim(),
        k: cfg.k,
        k2: cfg.k2,
        m: g.num_classes(),
    };
    let mut params = ModelParams::init(dims, &mut rng);
    let mut tape = Tape::new();
    let fwd = forward(&mut tape, &params, &ctx, cfg, Draw::Sample(&mut rng))?;
    tape.backward(fwd.total, &mut params.store)?;
    let batch = fwd.batch;

    let ids: Vec<ParamId> = vec![params.w1, params.w2, params.wc, params.s];
    let mut out = Vec::new();
    for id in ids {
        let analytic = params.store.grad(id).clone();
        let mut probe = params.clone();
        let mut check = ParamCheck {
            param: params.store.name(id).to_string(),
            entries: analytic.len(),
            max_abs_err: 0.0,
            max_rel_err: 0.0,
            failures: 0,
        };
        for i in 0..analytic.len() {
            let orig = probe.store.value(id).as_slice()[i];
            let eval = |x: f64, probe: &mut ModelParams| -> Result<f64, TrainError> {
                probe.store.value_mut(id).as_mut_slice()[i] = x;
                match &batch {
                    Some(b) => objective(probe, &ctx, cfg, Draw::Replay(b)),
                    None => objective(probe, &ctx, cfg, Draw::Sample(&mut ChaCha8Rng::seed_from_u64(0))),
                }
            };
            let plus = eval(orig + tol.step, &mut probe)?;
            let minus = eval(orig - tol.step, &mut probe)?;
            probe.store.value_mut(id).as_mut_slice()[i] = orig;
            let numeric = (plus - minus) / (2.0 * tol.step);
            let a = analytic.as_slice()[i];
            let err = (a - numeric).abs();
            check.max_abs_err = check.max_abs_err.max(err);
            let scale = a.abs().max(numeric.abs());
            if scale > 0.0 {
                check.max_rel_err = check.max_rel_err.max(err / scale);
            }
            if !tol.accepts(a, numeric) {
                check.failures += 1;
            }
        }
        out.push(check);
    }
    Ok(GradCheckReport {
        variant: cfg.variant,
        seed: cfg.seed,
        params: out,
    })
}

/// [`check`] on the fixture graph for one variant.
pub fn check_variant(variant: Variant, seed: u64, tol: Tolerance) -> Result<GradCheckReport, TrainError> {
    let (g, masks) = fixture(seed);
    check(&g, &masks, &fixture_config(variant, seed), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_rule() {
        let t = Tolerance::default();
        assert!(t.accepts(1.0, 1.0 + 5e-5));
        assert!(!t.accepts(1.0, 1.001));
        assert!(t.accepts(1e-9, 5e-7));
    }

    #[test]
    fn every_variant_passes() {
        for v in Variant::ALL {
            let r = check_variant(v, 3, Tolerance::default()).unwrap();
            assert!(r.passed(), "{v}: {:?}", r.params);
        }
    }
}
