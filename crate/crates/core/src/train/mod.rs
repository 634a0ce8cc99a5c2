//! Training loop: optional edge-task pretraining, then joint optimization of
//! `L_node + λ·L_edge` with early stopping on validation macro-F.

mod config;
mod objective;
mod record;

use std::io::Write;
use std::time::Instant;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{EdgePairs, NeighborPool, TrainConfig, Variant};
pub use objective::{forward, infer, used_params, Draw, Forward, TrainContext};
pub use record::{EpochRecord, RunRecord};

use crate::autodiff::{Mat, Tape, TensorError};
use crate::classifier::predict_row;
use crate::edge::{edge_loss, EdgeError};
use crate::encoder::encode;
use crate::graph::{Graph, GraphError, SplitMasks};
use crate::metrics::{accuracy, f_macro, MetricsReport};
use crate::model::{ModelDims, ModelParams};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error("training aborted at epoch {epoch}: {source}")]
    Aborted {
        epoch: usize,
        #[source]
        source: Box<TrainError>,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl TrainError {
    fn at(self, epoch: usize) -> Self {
        TrainError::Aborted {
            epoch,
            source: Box::new(self),
        }
    }
}

pub struct TrainOutput {
    pub params: ModelParams,
    pub record: RunRecord,
    /// Class probabilities for the original nodes under the best checkpoint.
    pub probabilities: Mat,
}

/// Fits `W¹` and `S` to the edge reconstruction loss alone. Returns the loss
/// of each epoch, measured before that epoch's update. Stops once the loss
/// has gone `pretrain_patience` epochs without a relative improvement of
/// `pretrain_min_delta`; patience 0 runs a single epoch.
pub fn pretrain(params: &mut ModelParams, ctx: &TrainContext, cfg: &TrainConfig) -> Result<Vec<f64>, TrainError> {
    let target = ctx
        .edge_target()
        .ok_or_else(|| TrainError::Config("pretraining needs an edge target".into()))?;
    let adam = cfg.adam();
    let ids = [params.w1, params.s];
    let mut losses = Vec::new();
    let mut best = f64::INFINITY;
    let mut since = 0;
    for epoch in 0..cfg.pretrain_max_epochs {
        let mut tape = Tape::new();
        let step = (|| -> Result<f64, TrainError> {
            let w1 = tape.param(&params.store, params.w1);
            let s = tape.param(&params.store, params.s);
            let h1 = encode(&mut tape, ctx.encoder_input(), w1)?;
            let l = edge_loss(&mut tape, h1, s, target, cfg.edge_activation)?;
            tape.backward(l, &mut params.store)?;
            Ok(tape.value(l).get(0, 0))
        })()
        .map_err(|e| e.at(epoch))?;
        params.store.adam_step_only(&adam, &ids);
        losses.push(step);
        if step < best * (1.0 - cfg.pretrain_min_delta) {
            best = step;
            since = 0;
        } else {
            since += 1;
        }
        if since >= cfg.pretrain_patience {
            break;
        }
    }
    debug!("pretraining ran {} epochs", losses.len());
    Ok(losses)
}

/// Trains with a generator seeded from `cfg.seed`.
pub fn train(g: &Graph, masks: &SplitMasks, cfg: &TrainConfig) -> Result<TrainOutput, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_with_rng(g, masks, cfg, &mut rng, None)
}

fn val_scores(p: &Mat, labels: &[Option<usize>], mask: &[usize]) -> (f64, f64) {
    let preds: Vec<usize> = (0..p.rows()).map(|v| predict_row(p.row(v))).collect();
    (accuracy(&preds, labels, mask), f_macro(&preds, labels, mask, p.cols()))
}

/// Full run. Random draws, in order: baseline graph rebuild, sampled edge
/// pairs, parameter initialization, then per epoch the synthetic nodes.
pub fn train_with_rng<R: Rng>(
    g: &Graph,
    masks: &SplitMasks,
    cfg: &TrainConfig,
    rng: &mut R,
    mut synthetic_log: Option<&mut dyn Write>,
) -> Result<TrainOutput, TrainError> {
    let start = Instant::now();
    let ctx = TrainContext::build(g, masks, cfg, rng)?;
    let dims = ModelDims {
        d: g.feature_dim(),
        k: cfg.k,
        k2: cfg.k2,
        m: g.num_classes(),
    };
    let mut params = ModelParams::init(dims, rng);
    let pretrain_losses = if cfg.variant.pretrains() {
        pretrain(&mut params, &ctx, cfg)?
    } else {
        Vec::new()
    };

    let adam = cfg.adam();
    let ids = used_params(&params, cfg.variant);
    let labels = g.labels();
    let val_mask = masks.val();
    let needs_clean_pass = cfg.variant.is_graphsmote();
    let mut epochs = Vec::new();
    let mut best_f = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_values = params.store.snapshot();
    let mut since = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let mut tape = Tape::new();
        let fwd = forward(&mut tape, &params, &ctx, cfg, Draw::Sample(&mut *rng)).map_err(|e| e.at(epoch))?;
        let (val_acc, val_f) = if needs_clean_pass {
            let p = infer(&params, &ctx, cfg).map_err(|e| e.at(epoch))?;
            val_scores(&p, labels, val_mask)
        } else {
            val_scores(tape.value(fwd.probs), labels, val_mask)
        };
        if val_f > best_f {
            best_f = val_f;
            best_epoch = epoch;
            best_values = params.store.snapshot();
            since = 0;
        } else {
            since += 1;
        }
        if let (Some(w), Some(b)) = (synthetic_log.as_deref_mut(), fwd.batch.as_ref()) {
            b.write_log(w, epoch)?;
        }
        let node_loss = tape.value(fwd.node_loss).get(0, 0);
        let edge_loss = fwd.edge_loss.map(|e| tape.value(e).get(0, 0));
        let total_loss = tape.value(fwd.total).get(0, 0);
        tape.backward(fwd.total, &mut params.store)
            .map_err(|e| TrainError::from(e).at(epoch))?;
        params.store.adam_step_only(&adam, &ids);
        epochs.push(EpochRecord {
            epoch,
            node_loss,
            edge_loss,
            total_loss,
            val_acc,
            val_f_macro: val_f,
            synthetic: fwd.batch.as_ref().map_or(0, |b| b.len()),
        });
        if since >= cfg.patience {
            stopped_early = true;
            break;
        }
    }

    params.store.restore(&best_values);
    let full = infer(&params, &ctx, cfg)?;
    let probabilities = full.select_rows(&(0..ctx.num_original).collect::<Vec<_>>());
    let record = RunRecord {
        config: cfg.clone(),
        minority_classes: ctx.minority.clone(),
        pretrain_losses,
        best_epoch,
        stopped_early,
        wall_time_secs: start.elapsed().as_secs_f64(),
        val: MetricsReport::compute(&probabilities, labels, masks.val()),
        test: MetricsReport::compute(&probabilities, labels, masks.test()),
        epochs,
    };
    info!(
        "{} seed {}: {} epochs, best {} (val F {:.4}), test F {:.4}",
        cfg.variant,
        cfg.seed,
        record.epochs.len(),
        best_epoch,
        best_f,
        record.test.f_macro
    );
    Ok(TrainOutput {
        params,
        record,
        probabilities,
    })
}
