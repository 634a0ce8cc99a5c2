use std::sync::Arc;

use graphsmote::autodiff::{Mat, Tape};
use graphsmote::classifier::{head, hidden, ClassifierOptions};
use graphsmote::edge::{augment_soft, augment_thresholded, AugmentedGraph, EdgeActivation};
use graphsmote::graph::{Adjacency, ClassStats, Graph, SplitMasks};
use graphsmote::oversample::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random embeddings for `sizes.len()` classes, all nodes in the pool.
fn setup(seed: u64, sizes: &[usize], k: usize) -> (Mat, Vec<Option<usize>>, ClassPool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = sizes.iter().sum();
    let labels: Vec<Option<usize>> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(Some(c), s))
        .collect();
    let h = Mat::from_vec(n, k, (0..n * k).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    let nodes: Vec<usize> = (0..n).collect();
    let pool = ClassPool::new(&labels, &nodes, sizes.len());
    (h, labels, pool)
}

fn check_batch(h: &Mat, labels: &[Option<usize>], pool: &ClassPool, b: &SyntheticBatch) {
    let mut log = Vec::new();
    b.write_log(&mut log, 0).unwrap();
    // replay from the written log, not from the in-memory batch
    let text = String::from_utf8(log).unwrap();
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let (c, v, nn): (usize, usize, usize) = (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        let delta: f64 = f[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&delta));
        assert_eq!(labels[v], Some(c));
        assert_eq!(labels[nn], Some(c));
        assert_eq!(b.labels[i], c);
        assert_eq!(nn, nearest_same_class(h, v, labels, pool));
        for j in 0..h.cols() {
            let want = (1.0 - delta) * h.get(v, j) + delta * h.get(nn, j);
            let got = b.embeddings.get(i, j);
            assert_eq!(got.to_bits(), want.to_bits());
            let (lo, hi) = (h.get(v, j).min(h.get(nn, j)), h.get(v, j).max(h.get(nn, j)));
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            assert!(lo - slack <= got && got <= hi + slack);
        }
    }
}

#[test]
fn thousand_synthetic_nodes_keep_invariants() {
    let mut total = 0;
    let mut seed = 0;
    while total < 1000 {
        let sizes = [12, 7, 3, 1];
        let (h, labels, pool) = setup(seed, &sizes, 4);
        let stats = ClassStats::from_sizes(sizes.to_vec()).unwrap();
        let plan = plan_from_scale(&stats, OversampleScale::Balance, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = smote_interpolate(&h, &plan, &pool, &mut rng);
        check_batch(&h, &labels, &pool, &b);
        for (c, &s) in sizes.iter().enumerate() {
            let synthetic = b.labels.iter().filter(|&&l| l == c).count();
            assert_eq!(s + synthetic, 12);
        }
        total += b.len();
        seed += 1;
    }
}

#[test]
fn endpoints_of_delta() {
    let (h, labels, pool) = setup(3, &[4, 4], 3);
    let plan = SamplingPlan { counts: vec![2, 0] };
    let b = smote_interpolate(&h, &plan, &pool, &mut ChaCha8Rng::seed_from_u64(0));
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    for delta in [0.0, 1.0] {
        let replay: Vec<_> = b
            .interpolations()
            .into_iter()
            .map(|mut i| {
                i.delta = delta;
                i
            })
            .collect();
        let out = tape.interpolate_rows(hv, &replay).unwrap();
        for (i, it) in replay.iter().enumerate() {
            let src = if delta == 0.0 { it.base } else { it.neighbor };
            assert_eq!(tape.value(out).row(i), h.row(src));
        }
    }
    assert_eq!(labels.len(), 8);
}

#[test]
fn fixed_seed_reproduces_batch() {
    let (h, _, pool) = setup(9, &[10, 5], 3);
    let plan = SamplingPlan { counts: vec![0, 7] };
    let a = smote_interpolate(&h, &plan, &pool, &mut ChaCha8Rng::seed_from_u64(5));
    let b = smote_interpolate(&h, &plan, &pool, &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(a, b);
}

#[test]
fn raw_smote_with_zero_delta_is_duplicate() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10;
    let labels: Vec<Option<usize>> = (0..n).map(|v| Some(usize::from(v >= 7))).collect();
    let edges = [(0, 7), (7, 8), (8, 9), (1, 9), (2, 3)];
    let g = Graph::new(
        Adjacency::from_edges(n, &edges, false),
        Mat::glorot(n, 3, &mut rng),
        labels,
        2,
    )
    .unwrap();
    let masks = SplitMasks::new(n, (0..n).collect(), vec![], vec![]).unwrap();
    let plan = SamplingPlan { counts: vec![0, 4] };
    let (g2, m2, batch) = baseline_raw_smote(&g, &masks, &plan, &mut ChaCha8Rng::seed_from_u64(2));
    assert!(g2.adjacency().is_symmetric());
    assert_eq!(m2.train().len(), n + 4);
    for (i, &(v, nn)) in batch.parents.iter().enumerate() {
        let new = n + i;
        assert_eq!(g2.adjacency().degree(new), g.adjacency().degree(v));
        let d = batch.deltas[i];
        for j in 0..3 {
            let want = (1.0 - d) * g.features().get(v, j) + d * g.features().get(nn, j);
            assert_eq!(g2.features().get(new, j).to_bits(), want.to_bits());
        }
    }
    // with every delta forced to zero the features are exactly the seed rows
    let zero = SyntheticBatch {
        deltas: vec![0.0; batch.len()],
        ..batch.clone()
    };
    for (i, it) in zero.interpolations().iter().enumerate() {
        let row: Vec<f64> = (0..3)
            .map(|j| (1.0 - it.delta) * g.features().get(it.base, j))
            .collect();
        assert_eq!(row.as_slice(), g.features().row(batch.parents[i].0));
    }
}

/// Embed-SMOTE interpolates second-layer rows; the synthetic rows reach only
/// the linear head and have no edges.
#[test]
fn embed_smote_hook_at_second_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 6;
    let adj = Arc::new(Adjacency::from_edges(n, &[(0, 1), (1, 2), (3, 4), (4, 5)], false));
    let labels: Vec<Option<usize>> = (0..n).map(|v| Some(usize::from(v >= 4))).collect();
    let mut t = Tape::new();
    let h1 = t.constant(Mat::glorot(n, 3, &mut rng));
    let aug = AugmentedGraph::plain(h1, adj, labels.clone());
    let w2 = t.constant(Mat::glorot(6, 4, &mut rng));
    let wc = t.constant(Mat::glorot(8, 2, &mut rng));
    let h2 = hidden(&mut t, &aug, w2, Default::default()).unwrap();
    let h2v = t.value(h2).clone();
    let pool = ClassPool::new(&labels, &(0..n).collect::<Vec<_>>(), 2);
    let b = smote_interpolate(&h2v, &SamplingPlan { counts: vec![0, 3] }, &pool, &mut rng);
    check_batch(&h2v, &labels, &pool, &b);
    let extra = t.interpolate_rows(h2, &b.interpolations()).unwrap();
    let p = head(&mut t, &aug, h2, Some(extra), wc, ClassifierOptions::default()).unwrap();
    assert_eq!(t.value(p).rows(), n + 3);
    // a synthetic row's logits are [row | 0] · Wc
    let wcv = t.value(wc).clone();
    for i in 0..3 {
        let row = b.embeddings.row(i);
        let z: Vec<f64> = (0..2).map(|c| (0..4).map(|j| row[j] * wcv.get(j, c)).sum()).collect();
        let p0 = 1.0 / (1.0 + (z[1] - z[0]).exp());
        assert!((t.value(p).get(n + i, 0) - p0).abs() < 1e-12);
    }
}

fn augmentation_case(seed: u64) -> (Tape, Arc<Adjacency>, Vec<Option<usize>>, [graphsmote::autodiff::Var; 3]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 7;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < 0.4 {
                edges.push((i, j));
            }
        }
    }
    let adj = Arc::new(Adjacency::from_edges(n, &edges, false));
    let mut t = Tape::new();
    let hr = t.constant(Mat::glorot(n, 3, &mut rng).map(|x| 2.0 * x));
    let hs = t.constant(Mat::glorot(3, 3, &mut rng).map(|x| 2.0 * x));
    let s = t.constant(Mat::glorot(3, 3, &mut rng).map(|x| 2.0 * x));
    (t, adj, vec![Some(0); n], [hr, hs, s])
}

proptest! {
    #[test]
    fn eta_monotonicity_and_real_block(seed in 0u64..300) {
        let (mut t, adj, labels, [hr, hs, s]) = augmentation_case(seed);
        let n = adj.num_nodes();
        let mut previous: Option<Mat> = None;
        for step in (0..10).rev() {
            let eta = step as f64 / 9.0;
            let aug = augment_thresholded(&mut t, hr, hs, s, &[0, 0, 0], &adj, &labels, eta, EdgeActivation::Sigmoid).unwrap();
            let dense = aug.dense_adjacency(&t);
            prop_assert!(dense.as_slice().iter().all(|&x| x == 0.0 || x == 1.0));
            for i in 0..n + 3 {
                for j in 0..n + 3 {
                    prop_assert_eq!(dense.get(i, j), dense.get(j, i));
                }
            }
            if let Some(prev) = &previous {
                // eta decreased: every previous edge survives
                for (a, b) in prev.as_slice().iter().zip(dense.as_slice()) {
                    prop_assert!(*a <= *b);
                }
            }
            if step == 9 {
                prop_assert!(dense.as_slice()[..].iter().skip((n + 3) * n).all(|&x| x == 0.0));
            }
            if step == 0 {
                for j in 0..3 {
                    for u in 0..n {
                        prop_assert_eq!(dense.get(n + j, u), 1.0);
                    }
                }
            }
            previous = Some(dense);
        }
        let soft = augment_soft(&mut t, hr, hs, s, &[0, 0, 0], &adj, &labels, EdgeActivation::Sigmoid).unwrap();
        let dense = soft.dense_adjacency(&t);
        prop_assert!(dense.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        let a = adj.to_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(dense.get(i, j).to_bits(), a.get(i, j).to_bits());
            }
        }
    }
}

#[test]
fn scores_threshold_example() {
    // two real nodes chosen so the synthetic node scores logistic(z) with
    // z = ln(0.3/0.7) and ln(0.6/0.4)
    let z = [(0.3f64 / 0.7).ln(), (0.6f64 / 0.4).ln()];
    let mut t = Tape::new();
    let hr = t.constant(Mat::from_rows(&[&[z[0]], &[z[1]]]));
    let hs = t.constant(Mat::from_rows(&[&[1.0]]));
    let s = t.constant(Mat::scalar(1.0));
    let adj = Arc::new(Adjacency::empty(2));
    let aug = augment_thresholded(
        &mut t,
        hr,
        hs,
        s,
        &[0],
        &adj,
        &[None, None],
        0.5,
        EdgeActivation::Sigmoid,
    )
    .unwrap();
    let dense = aug.dense_adjacency(&t);
    assert_eq!((dense.get(2, 0), dense.get(2, 1)), (0.0, 1.0));
}
