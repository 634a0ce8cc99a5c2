use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Adjacency, Graph, GraphError};
use crate::autodiff::Mat;

/// Stochastic block model with Gaussian class-conditional features.
///
/// Node ids are assigned block by block. Each class gets a mean vector drawn
/// from `N(0, mean_scale² I)`; a node's features are its class mean plus
/// `N(0, noise² I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub class_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub dim: usize,
    pub seed: u64,
    pub mean_scale: f64,
    pub noise: f64,
}

impl SbmConfig {
    pub fn new(class_sizes: Vec<usize>, p_in: f64, p_out: f64, dim: usize, seed: u64) -> Self {
        Self {
            class_sizes,
            p_in,
            p_out,
            dim,
            seed,
            mean_scale: 1.0,
            noise: 1.0,
        }
    }
}

pub fn generate_sbm_graph(cfg: &SbmConfig) -> Result<Graph, GraphError> {
    let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
    if !prob_ok(cfg.p_in) || !prob_ok(cfg.p_out) || cfg.p_in <= cfg.p_out {
        return Err(GraphError::Invalid(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
            cfg.p_in, cfg.p_out
        )));
    }
    if cfg.class_sizes.is_empty() || cfg.class_sizes.contains(&0) {
        return Err(GraphError::Invalid("every block needs at least one node".into()));
    }
    if cfg.dim == 0 || cfg.noise.is_nan() || cfg.noise < 0.0 || cfg.mean_scale.is_nan() || cfg.mean_scale < 0.0 {
        return Err(GraphError::Invalid("bad feature parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.class_sizes.len();
    let labels: Vec<Option<usize>> = cfg
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(Some(c), k))
        .collect();
    let n = labels.len();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let means: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..cfg.dim)
                .map(|_| cfg.mean_scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut features = Mat::zeros(n, cfg.dim);
    for (v, label) in labels.iter().enumerate() {
        let mu = &means[label.expect("all labeled")];
        for (x, &mu_j) in features.row_mut(v).iter_mut().zip(mu) {
            *x = mu_j + cfg.noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Graph::new(Adjacency::from_edges(n, &edges, false), features, labels, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{imbalance_ratio, SplitMasks};

    #[test]
    fn degenerate_probabilities_give_cliques() {
        let g = generate_sbm_graph(&SbmConfig::new(vec![3, 3], 1.0, 0.0, 2, 0)).unwrap();
        let a = g.adjacency();
        assert_eq!(a.num_edges(), 6);
        for v in 0..6 {
            for u in 0..6 {
                let same = (v < 3) == (u < 3);
                assert_eq!(a.contains(v, u), same && v != u);
            }
        }
    }

    #[test]
    fn imbalance_by_construction() {
        let g = generate_sbm_graph(&SbmConfig::new(vec![50, 50, 5], 0.1, 0.01, 4, 3)).unwrap();
        let masks = SplitMasks::new(105, (0..105).collect(), vec![], vec![]).unwrap();
        let st = imbalance_ratio(&g, &masks).unwrap();
        assert!((st.imbalance_ratio - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(generate_sbm_graph(&SbmConfig::new(vec![3, 3], 0.1, 0.2, 2, 0)).is_err());
        assert!(generate_sbm_graph(&SbmConfig::new(vec![3, 0], 0.5, 0.2, 2, 0)).is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let c = SbmConfig::new(vec![10, 10], 0.3, 0.05, 3, 9);
        let a = generate_sbm_graph(&c).unwrap();
        let b = generate_sbm_graph(&c).unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
        assert_eq!(a.features(), b.features());
    }
}
