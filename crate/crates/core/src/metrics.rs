//! Accuracy, one-vs-rest macro AUC-ROC and macro F1.
//!
//! All functions score the nodes listed in `mask`; `labels` is indexed by
//! node id and unlabeled nodes on the mask are skipped.

use std::fmt::Write as _;

use log::warn;
use serde::Serialize;

use crate::autodiff::Mat;
use crate::classifier::predict_row;

fn scored(labels: &[Option<usize>], mask: &[usize]) -> Vec<(usize, usize)> {
    mask.iter().filter_map(|&v| labels[v].map(|c| (v, c))).collect()
}

pub fn accuracy(preds: &[usize], labels: &[Option<usize>], mask: &[usize]) -> f64 {
    let rows = scored(labels, mask);
    if rows.is_empty() {
        return 0.0;
    }
    let hits = rows.iter().filter(|&&(v, c)| preds[v] == c).count();
    hits as f64 / rows.len() as f64
}

/// Binary AUC of `scores` against `positive` by the midrank statistic.
/// `None` without at least one positive and one negative.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Per-class one-vs-rest AUC using probability column `c` as the score.
pub fn auc_per_class(p: &Mat, labels: &[Option<usize>], mask: &[usize]) -> Vec<Option<f64>> {
    let rows = scored(labels, mask);
    (0..p.cols())
        .map(|c| {
            let scores: Vec<f64> = rows.iter().map(|&(v, _)| p.get(v, c)).collect();
            let positive: Vec<bool> = rows.iter().map(|&(_, y)| y == c).collect();
            let auc = binary_auc(&scores, &positive);
            if auc.is_none() {
                warn!("class {c} lacks positives or negatives on the mask; excluded from macro AUC");
            }
            auc
        })
        .collect()
}

/// Unweighted mean over the classes whose AUC is defined; NaN if none is.
pub fn auc_macro(p: &Mat, labels: &[Option<usize>], mask: &[usize]) -> f64 {
    let defined: Vec<f64> = auc_per_class(p, labels, mask).into_iter().flatten().collect();
    if defined.is_empty() {
        return f64::NAN;
    }
    defined.iter().sum::<f64>() / defined.len() as f64
}

/// `counts[true][pred]` over the mask.
pub fn confusion(preds: &[usize], labels: &[Option<usize>], mask: &[usize], m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; m]; m];
    for (v, c) in scored(labels, mask) {
        out[c][preds[v]] += 1;
    }
    out
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `(precision, recall, f1)` per class; every 0/0 is taken as 0.
pub fn per_class_prf(confusion: &[Vec<usize>]) -> Vec<(f64, f64, f64)> {
    let m = confusion.len();
    (0..m)
        .map(|c| {
            let tp = confusion[c][c];
            let predicted: usize = (0..m).map(|t| confusion[t][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            let (p, r) = (ratio(tp, predicted), ratio(tp, actual));
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f)
        })
        .collect()
}

/// Unweighted mean of per-class F1 over all `m` classes.
pub fn f_macro(preds: &[usize], labels: &[Option<usize>], mask: &[usize], m: usize) -> f64 {
    let prf = per_class_prf(&confusion(preds, labels, mask, m));
    prf.iter().map(|x| x.2).sum::<f64>() / m as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub auc_macro: f64,
    pub f_macro: f64,
    pub per_class: Vec<ClassMetrics>,
}

impl MetricsReport {
    /// Scores class probabilities `p` (one row per node) on `mask`.
    pub fn compute(p: &Mat, labels: &[Option<usize>], mask: &[usize]) -> Self {
        let m = p.cols();
        let preds: Vec<usize> = (0..p.rows()).map(|v| predict_row(p.row(v))).collect();
        let prf = per_class_prf(&confusion(&preds, labels, mask, m));
        let aucs = auc_per_class(p, labels, mask);
        let defined: Vec<f64> = aucs.iter().flatten().copied().collect();
        let auc_macro = if defined.is_empty() {
            f64::NAN
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        Self {
            acc: accuracy(&preds, labels, mask),
            auc_macro,
            f_macro: prf.iter().map(|x| x.2).sum::<f64>() / m as f64,
            per_class: prf
                .into_iter()
                .zip(aucs)
                .map(|((precision, recall, f1), auc)| ClassMetrics {
                    precision,
                    recall,
                    f1,
                    auc,
                })
                .collect(),
        }
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `variant,ACC,AUC-ROC,F Score` with `mean±std` cells.
pub fn table_csv(rows: &[(String, Vec<MetricsReport>)]) -> String {
    let mut out = String::from("variant,ACC,AUC-ROC,F Score\n");
    for (name, reports) in rows {
        let cell = |f: fn(&MetricsReport) -> f64| {
            let (m, s) = mean_std(&reports.iter().map(f).collect::<Vec<_>>());
            format!("{m:.4}±{s:.4}")
        };
        let _ = writeln!(
            out,
            "{name},{},{},{}",
            cell(|r| r.acc),
            cell(|r| r.auc_macro),
            cell(|r| r.f_macro)
        );
    }
    out
}
