use rand::{Rng, RngCore};

use super::{EdgePairs, NeighborPool, TrainConfig, TrainError, Variant};
use crate::autodiff::{Mat, ParamId, Tape, Var};
use crate::classifier::{classify, head, hidden, node_loss, ClassifierOptions};
use crate::edge::{augment_soft, augment_thresholded, edge_loss, AugmentedGraph, EdgeMode, EdgeTarget};
use crate::encoder::{encode, EncoderInput};
use crate::graph::{imbalance_ratio, ClassStats, Graph, SplitMasks};
use crate::model::ModelParams;
use crate::oversample::{
    baseline_duplicate, baseline_raw_smote, plan_from_scale, reweight_vector, smote_interpolate_with, ClassPool,
    SamplingPlan, SyntheticBatch,
};

/// Everything about a run that stays fixed across epochs.
pub struct TrainContext {
    /// Graph the model trains on; baselines that rebuild the graph append
    /// their new nodes after the original ones.
    pub graph: Graph,
    pub masks: SplitMasks,
    pub num_original: usize,
    pub stats: ClassStats,
    pub minority: Vec<usize>,
    pub plan: SamplingPlan,
    input: EncoderInput,
    seeds: ClassPool,
    neighbors: ClassPool,
    targets: Vec<(usize, usize)>,
    weights: Option<Vec<f64>>,
    edge_target: Option<EdgeTarget>,
}

impl TrainContext {
    /// Draws from `rng` only for the baselines that rebuild the graph and for
    /// sampled edge pairs, in that order.
    pub fn build<R: Rng + ?Sized>(
        g: &Graph,
        masks: &SplitMasks,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self, TrainError> {
        cfg.validate().map_err(TrainError::Config)?;
        masks.validate_against(g)?;
        let stats = imbalance_ratio(g, masks)?;
        let minority = match &cfg.minority_classes {
            Some(list) => {
                if let Some(&c) = list.iter().find(|&&c| c >= g.num_classes()) {
                    return Err(TrainError::Config(format!("minority class {c} out of range")));
                }
                list.clone()
            }
            None => stats.minority_classes(),
        };
        let plan = if cfg.variant.oversamples() {
            plan_from_scale(&stats, cfg.scale, &minority)
        } else {
            SamplingPlan {
                counts: vec![0; g.num_classes()],
            }
        };
        let (graph, train_masks) = match cfg.variant {
            Variant::OversampleDup => baseline_duplicate(g, masks, &plan, rng),
            Variant::RawSmote => {
                let (graph, m, _) = baseline_raw_smote(g, masks, &plan, rng);
                (graph, m)
            }
            _ => (g.clone(), masks.clone()),
        };
        let needs_edges = cfg.variant.is_graphsmote() && (cfg.lambda > 0.0 || cfg.variant.pretrains());
        let edge_target = if needs_edges {
            Some(match cfg.edge_pairs {
                EdgePairs::Dense => EdgeTarget::dense(graph.adjacency(), cfg.dense_node_cap)?,
                EdgePairs::Sampled { negatives_per_edge } => {
                    EdgeTarget::sampled(graph.adjacency(), negatives_per_edge, rng)
                }
            })
        } else {
            None
        };
        let seeds = ClassPool::from_masks(&graph, &train_masks);
        let neighbors = match cfg.neighbor_pool {
            NeighborPool::Train => seeds.clone(),
            NeighborPool::TrainVal => {
                let mut nodes = train_masks.train().to_vec();
                nodes.extend_from_slice(train_masks.val());
                ClassPool::new(graph.labels(), &nodes, graph.num_classes())
            }
        };
        let targets = train_masks
            .train()
            .iter()
            .map(|&v| (v, graph.label(v).expect("train nodes are labeled")))
            .collect();
        let weights = (cfg.variant == Variant::Reweight).then(|| reweight_vector(&stats));
        Ok(Self {
            input: EncoderInput::new(&graph, cfg.aggregation)?,
            num_original: g.num_nodes(),
            graph,
            masks: train_masks,
            stats,
            minority,
            plan,
            seeds,
            neighbors,
            targets,
            weights,
            edge_target,
        })
    }

    pub fn edge_target(&self) -> Option<&EdgeTarget> {
        self.edge_target.as_ref()
    }

    pub fn encoder_input(&self) -> &EncoderInput {
        &self.input
    }
}

/// Source of synthetic nodes for one forward pass.
pub enum Draw<'a> {
    Sample(&'a mut dyn RngCore),
    /// Reuse the seeds, neighbors and deltas of an earlier batch.
    Replay(&'a SyntheticBatch),
}

impl Draw<'_> {
    fn batch(self, h: &Mat, ctx: &TrainContext) -> SyntheticBatch {
        match self {
            Draw::Sample(rng) => smote_interpolate_with(h, &ctx.plan, &ctx.seeds, &ctx.neighbors, rng),
            Draw::Replay(b) => {
                let mut out = b.clone();
                for (i, &(v, nn)) in b.parents.iter().enumerate() {
                    let d = b.deltas[i];
                    for ((o, a), c) in out.embeddings.row_mut(i).iter_mut().zip(h.row(v)).zip(h.row(nn)) {
                        *o = (1.0 - d) * a + d * c;
                    }
                }
                out
            }
        }
    }
}

pub struct Forward {
    pub node_loss: Var,
    pub edge_loss: Option<Var>,
    pub total: Var,
    /// Class probabilities; real nodes come first.
    pub probs: Var,
    pub batch: Option<SyntheticBatch>,
}

/// Parameters the variant's objective depends on.
pub fn used_params(params: &ModelParams, variant: Variant) -> Vec<ParamId> {
    if variant.is_graphsmote() {
        vec![params.w1, params.w2, params.wc, params.s]
    } else {
        vec![params.w1, params.w2, params.wc]
    }
}

pub(crate) fn classifier_options(cfg: &TrainConfig) -> ClassifierOptions {
    ClassifierOptions {
        aggregation: cfg.aggregation,
        relu_logits: cfg.relu_logits,
    }
}

/// One evaluation of `L_node + λ·L_edge` on a fresh tape.
pub fn forward(
    tape: &mut Tape,
    params: &ModelParams,
    ctx: &TrainContext,
    cfg: &TrainConfig,
    draw: Draw<'_>,
) -> Result<Forward, TrainError> {
    let store = &params.store;
    let opts = classifier_options(cfg);
    let w1 = tape.param(store, params.w1);
    let w2 = tape.param(store, params.w2);
    let wc = tape.param(store, params.wc);
    let h1 = encode(tape, &ctx.input, w1)?;
    let n = ctx.graph.num_nodes();
    let adjacency = ctx.graph.adjacency();
    let mut targets = ctx.targets.clone();
    let mut batch = None;
    let mut edge = None;

    let probs = if cfg.variant.is_graphsmote() {
        let s = tape.param(store, params.s);
        let b = draw.batch(tape.value(h1), ctx);
        let aug = if b.is_empty() {
            AugmentedGraph::plain(h1, adjacency.clone(), ctx.graph.labels().to_vec())
        } else {
            let h_syn = tape.interpolate_rows(h1, &b.interpolations())?;
            let labels = ctx.graph.labels();
            match cfg.variant.edge_mode(cfg.eta).expect("graphsmote variant") {
                EdgeMode::Thresholded { eta } => augment_thresholded(
                    tape,
                    h1,
                    h_syn,
                    s,
                    &b.labels,
                    adjacency,
                    labels,
                    eta,
                    cfg.edge_activation,
                )?,
                EdgeMode::Soft => augment_soft(tape, h1, h_syn, s, &b.labels, adjacency, labels, cfg.edge_activation)?,
            }
        };
        targets.extend(b.labels.iter().enumerate().map(|(i, &c)| (n + i, c)));
        batch = Some(b);
        if cfg.lambda > 0.0 {
            let target = ctx.edge_target.as_ref().expect("edge target built when lambda > 0");
            edge = Some(edge_loss(tape, h1, s, target, cfg.edge_activation)?);
        }
        classify(tape, &aug, w2, wc, opts)?.1
    } else if cfg.variant == Variant::EmbedSmote {
        let aug = AugmentedGraph::plain(h1, adjacency.clone(), ctx.graph.labels().to_vec());
        let h2 = hidden(tape, &aug, w2, opts.aggregation)?;
        let b = draw.batch(tape.value(h2), ctx);
        let extra = if b.is_empty() {
            None
        } else {
            Some(tape.interpolate_rows(h2, &b.interpolations())?)
        };
        targets.extend(b.labels.iter().enumerate().map(|(i, &c)| (n + i, c)));
        batch = Some(b);
        head(tape, &aug, h2, extra, wc, opts)?
    } else {
        let aug = AugmentedGraph::plain(h1, adjacency.clone(), ctx.graph.labels().to_vec());
        classify(tape, &aug, w2, wc, opts)?.1
    };

    let node = node_loss(tape, probs, &targets, ctx.weights.as_deref())?;
    let total = match edge {
        Some(e) => {
            let scaled = tape.scale(e, cfg.lambda)?;
            tape.add(node, scaled)?
        }
        None => node,
    };
    Ok(Forward {
        node_loss: node,
        edge_loss: edge,
        total,
        probs,
        batch,
    })
}

/// Class probabilities for every node of the training graph, with no
/// synthetic nodes.
pub fn infer(params: &ModelParams, ctx: &TrainContext, cfg: &TrainConfig) -> Result<Mat, TrainError> {
    let mut tape = Tape::new();
    let store = &params.store;
    let w1 = tape.constant(store.value(params.w1).clone());
    let w2 = tape.constant(store.value(params.w2).clone());
    let wc = tape.constant(store.value(params.wc).clone());
    let h1 = encode(&mut tape, &ctx.input, w1)?;
    let aug = AugmentedGraph::plain(h1, ctx.graph.adjacency().clone(), ctx.graph.labels().to_vec());
    let (_, p) = classify(&mut tape, &aug, w2, wc, classifier_options(cfg))?;
    Ok(tape.value(p).clone())
}
