use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mat, TensorError};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Mat,
    grad: Mat,
    m: Mat,
    v: Mat,
    step: u64,
}

/// Named trainable matrices with gradient slots and per-entry Adam state.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
}

const CHECKPOINT_MAGIC: &str = "graphsmote-checkpoint v1";

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter. Names must be unique.
    pub fn insert(&mut self, name: &str, value: Mat) -> ParamId {
        assert!(self.id(name).is_none(), "duplicate parameter `{name}`");
        let (r, c) = value.shape();
        self.entries.push(Entry {
            name: name.to_owned(),
            value,
            grad: Mat::zeros(r, c),
            m: Mat::zeros(r, c),
            v: Mat::zeros(r, c),
            step: 0,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Mat {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Mat {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.entries[id.0].grad
    }

    pub fn step_count(&self, id: ParamId) -> u64 {
        self.entries[id.0].step
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// Adam step on every parameter, then zero all gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        let all: Vec<ParamId> = self.ids().collect();
        self.adam_step_only(cfg, &all);
    }

    /// Adam step restricted to `ids`; gradients of every parameter are zeroed
    /// afterwards. Weight decay is classic L2, added to the gradient before
    /// the moment updates.
    pub fn adam_step_only(&mut self, cfg: &AdamConfig, ids: &[ParamId]) {
        for &id in ids {
            let e = &mut self.entries[id.0];
            e.step += 1;
            let t = e.step as i32;
            let bc1 = 1.0 - cfg.beta1.powi(t);
            let bc2 = 1.0 - cfg.beta2.powi(t);
            let values = e.value.as_mut_slice();
            let grads = e.grad.as_slice();
            let m = e.m.as_mut_slice();
            let v = e.v.as_mut_slice();
            for i in 0..values.len() {
                let g = grads[i] + cfg.weight_decay * values[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        self.zero_grad();
    }

    /// Copy of all parameter values, for best-epoch checkpointing.
    pub fn snapshot(&self) -> Vec<Mat> {
        self.entries.iter().map(|e| e.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Mat]) {
        assert_eq!(values.len(), self.entries.len());
        for (e, v) in self.entries.iter_mut().zip(values) {
            assert_eq!(e.value.shape(), v.shape());
            e.value = v.clone();
        }
    }

    /// Text checkpoint:
    ///
    /// ```text
    /// graphsmote-checkpoint v1
    /// <count>
    /// <name> <rows> <cols>
    /// <row 0 values, space separated>
    /// ...
    /// ```
    ///
    /// Values use the shortest round-trip exponent form, so a save/load
    /// cycle is bit-exact.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<(), TensorError> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "{}", self.entries.len())?;
        for e in &self.entries {
            writeln!(w, "{} {} {}", e.name, e.value.rows(), e.value.cols())?;
            for r in 0..e.value.rows() {
                let line: Vec<String> = e.value.row(r).iter().map(|v| format!("{v:e}")).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self, TensorError> {
        let bad = |msg: String| TensorError::Checkpoint(msg);
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String, TensorError> {
            lines
                .next()
                .ok_or_else(|| bad(format!("unexpected end of file, expected {what}")))?
                .map_err(TensorError::from)
        };
        if next("header")?.trim() != CHECKPOINT_MAGIC {
            return Err(bad("missing header".into()));
        }
        let count: usize = next("entry count")?
            .trim()
            .parse()
            .map_err(|_| bad("bad entry count".into()))?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let head = next("entry header")?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(bad(format!("bad entry header `{head}`")));
            };
            let rows: usize = rows.parse().map_err(|_| bad(format!("bad rows in `{head}`")))?;
            let cols: usize = cols.parse().map_err(|_| bad(format!("bad cols in `{head}`")))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = next("matrix row")?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    data.push(tok.parse::<f64>().map_err(|_| bad(format!("bad value `{tok}`")))?);
                }
                if data.len() - before != cols {
                    return Err(bad(format!(
                        "row of `{name}` has {} values, expected {cols}",
                        data.len() - before
                    )));
                }
            }
            if store.id(name).is_some() {
                return Err(bad(format!("duplicate entry `{name}`")));
            }
            store.insert(name, Mat::from_vec(rows, cols, data)?);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), TensorError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TensorError> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}
