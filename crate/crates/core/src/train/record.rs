use std::io::Write;

use serde::Serialize;

use super::TrainConfig;
use crate::metrics::MetricsReport;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub node_loss: f64,
    pub edge_loss: Option<f64>,
    pub total_loss: f64,
    pub val_acc: f64,
    pub val_f_macro: f64,
    pub synthetic: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub minority_classes: Vec<usize>,
    pub pretrain_losses: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub wall_time_secs: f64,
    pub val: MetricsReport,
    pub test: MetricsReport,
}

#[derive(Serialize)]
struct Summary<'a> {
    summary: bool,
    config: &'a TrainConfig,
    minority_classes: &'a [usize],
    pretrain_epochs: usize,
    epochs: usize,
    best_epoch: usize,
    stopped_early: bool,
    wall_time_secs: f64,
    val: &'a MetricsReport,
    test: &'a MetricsReport,
}

impl RunRecord {
    /// One JSON object per epoch, then a summary line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        let summary = Summary {
            summary: true,
            config: &self.config,
            minority_classes: &self.minority_classes,
            pretrain_epochs: self.pretrain_losses.len(),
            epochs: self.epochs.len(),
            best_epoch: self.best_epoch,
            stopped_early: self.stopped_early,
            wall_time_secs: self.wall_time_secs,
            val: &self.val,
            test: &self.test,
        };
        serde_json::to_writer(&mut w, &summary)?;
        w.write_all(b"\n")
    }

    /// Same record with the wall time zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }
}
