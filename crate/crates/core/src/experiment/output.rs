use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use super::{io_err, ExperimentError, ExperimentResult, SweepAxis};
use crate::autodiff::Mat;
use crate::classifier::predict_row;
use crate::metrics::{mean_std, MetricsReport};

type Metric = fn(&MetricsReport) -> f64;

const METRICS: [(&str, Metric); 3] = [("acc", |r| r.acc), ("auc", |r| r.auc_macro), ("f", |r| r.f_macro)];

fn sweep_points(result: &ExperimentResult) -> Vec<Option<&str>> {
    if result.spec.sweep_axis == SweepAxis::None {
        vec![None]
    } else {
        result.spec.sweep_values.iter().map(|s| Some(s.as_str())).collect()
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(io_err(path))
}

fn stat(reports: &[&MetricsReport], f: Metric) -> (f64, f64) {
    mean_std(&reports.iter().map(|r| f(r)).collect::<Vec<_>>())
}

/// `runs.csv`, `summary.csv`, `table.csv` and one `grid_<metric>.csv` per
/// metric. None of them carries timing, so reruns are byte-identical.
pub(crate) fn write_tables(result: &ExperimentResult) -> Result<(), ExperimentError> {
    let spec = &result.spec;
    let out = &spec.output;
    let axis = spec.sweep_axis;
    let prefix = |s: Option<&str>| s.map_or(String::new(), |v| format!("{v},"));
    let head = if axis == SweepAxis::None {
        String::new()
    } else {
        format!("{},", axis.name())
    };

    let mut runs = format!("{head}variant,seed,status,acc,auc_macro,f_macro,best_epoch,epochs,minority_classes\n");
    for r in &result.runs {
        let p = prefix(r.job.sweep.as_deref());
        match &r.outcome {
            Ok(s) => {
                let minority: Vec<String> = s.minority_classes.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(
                    runs,
                    "{p}{},{},ok,{},{},{},{},{},{}",
                    r.job.variant,
                    r.job.seed,
                    s.test.acc,
                    s.test.auc_macro,
                    s.test.f_macro,
                    s.best_epoch,
                    s.epochs,
                    minority.join(";")
                );
            }
            Err(_) => {
                let _ = writeln!(runs, "{p}{},{},aborted,,,,,,", r.job.variant, r.job.seed);
            }
        }
    }
    write_file(&out.join("runs.csv"), &runs)?;

    let mut summary = format!("{head}variant,runs,acc_mean,acc_std,auc_mean,auc_std,f_mean,f_std\n");
    let mut table = format!("{head}variant,ACC,AUC-ROC,F Score\n");
    for s in sweep_points(result) {
        for &v in &spec.variants {
            let reports = result.reports(s, v);
            let _ = write!(summary, "{}{v},{}", prefix(s), reports.len());
            let _ = write!(table, "{}{v}", prefix(s));
            for (_, f) in METRICS {
                let (m, sd) = stat(&reports, f);
                let _ = write!(summary, ",{m},{sd}");
                let _ = write!(table, ",{m:.4}±{sd:.4}");
            }
            summary.push('\n');
            table.push('\n');
        }
    }
    write_file(&out.join("summary.csv"), &summary)?;
    write_file(&out.join("table.csv"), &table)?;

    for (name, f) in METRICS {
        let label = if axis == SweepAxis::None { "sweep" } else { axis.name() };
        let mut grid = label.to_string();
        for v in &spec.variants {
            let _ = write!(grid, ",{v}");
        }
        grid.push('\n');
        for s in sweep_points(result) {
            grid.push_str(s.unwrap_or("none"));
            for &v in &spec.variants {
                let _ = write!(grid, ",{}", stat(&result.reports(s, v), f).0);
            }
            grid.push('\n');
        }
        write_file(&out.join(format!("grid_{name}.csv")), &grid)?;
    }
    Ok(())
}

/// One `series/<variant>_<metric>.csv` per variant and metric, with rows
/// `value,mean,std` in configured sweep order. Without a sweep axis nothing
/// is written.
pub fn emit_plot_data(result: &ExperimentResult) -> Result<(), ExperimentError> {
    let spec = &result.spec;
    if spec.sweep_axis == SweepAxis::None {
        return Ok(());
    }
    let dir = spec.output.join("series");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for &v in &spec.variants {
        for (name, f) in METRICS {
            let mut text = format!("{},mean,std\n", spec.sweep_axis.name());
            for value in &spec.sweep_values {
                let (m, sd) = stat(&result.reports(Some(value), v), f);
                let _ = writeln!(text, "{value},{m},{sd}");
            }
            write_file(&dir.join(format!("{v}_{name}.csv")), &text)?;
        }
    }
    Ok(())
}

/// `node_id,true_label,predicted_label,p_0..p_{m-1}` for the nodes in
/// `nodes`; unlabeled nodes get true label `-1`.
pub fn write_predictions<W: Write>(
    mut w: W,
    p: &Mat,
    labels: &[Option<usize>],
    nodes: &[usize],
) -> std::io::Result<()> {
    write!(w, "node_id,true_label,predicted_label")?;
    for c in 0..p.cols() {
        write!(w, ",p_{c}")?;
    }
    writeln!(w)?;
    for &v in nodes {
        let truth = labels[v].map_or(-1, |c| c as i64);
        write!(w, "{v},{truth},{}", predict_row(p.row(v)))?;
        for x in p.row(v) {
            write!(w, ",{x:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// A parsed prediction dump, rows in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionDump {
    pub nodes: Vec<usize>,
    pub labels: Vec<Option<usize>>,
    pub predicted: Vec<usize>,
    pub probabilities: Mat,
}

impl PredictionDump {
    /// Scores every labeled row of the dump.
    pub fn report(&self) -> MetricsReport {
        let mask: Vec<usize> = (0..self.labels.len()).collect();
        MetricsReport::compute(&self.probabilities, &self.labels, &mask)
    }
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<PredictionDump, String> {
    let mut lines = r.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(e.to_string()),
        None => return Err("empty prediction file".into()),
    };
    let m = header.split(',').filter(|c| c.trim().starts_with("p_")).count();
    if m == 0 {
        return Err("header lists no probability columns".into());
    }
    let (mut nodes, mut labels, mut predicted, mut data) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |what: &str| format!("line {}: {what}", i + 1);
        if fields.len() != 3 + m {
            return Err(bad(&format!("expected {} fields, found {}", 3 + m, fields.len())));
        }
        nodes.push(fields[0].parse().map_err(|_| bad("bad node id"))?);
        let truth: i64 = fields[1].parse().map_err(|_| bad("bad true label"))?;
        if truth >= m as i64 {
            return Err(bad("true label out of range"));
        }
        labels.push((truth >= 0).then_some(truth as usize));
        predicted.push(fields[2].parse().map_err(|_| bad("bad predicted label"))?);
        for f in &fields[3..] {
            data.push(f.parse::<f64>().map_err(|_| bad("bad probability"))?);
        }
    }
    let probabilities = Mat::from_vec(nodes.len(), m, data).map_err(|e| e.to_string())?;
    Ok(PredictionDump {
        nodes,
        labels,
        predicted,
        probabilities,
    })
}
