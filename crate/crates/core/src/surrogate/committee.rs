use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{Batch, Mlp, TrainOptions};
use crate::error::{invalid, Result};
use crate::par;
use crate::rng::{self, Rng};

/// Network topology shared by all members of a committee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub activation: String,
    pub outputs: usize,
    /// Input columns passed through `ln` before standardisation.
    #[serde(default)]
    pub log_inputs: Vec<usize>,
}

impl NetSpec {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            hidden: vec![32, 32],
            activation: "tanh".into(),
            outputs,
            log_inputs: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !matches!(self.inputs, 2 | 4) {
            return Err(invalid(format!("input width must be 2 or 4, got {}", self.inputs)));
        }
        if self.outputs == 0 || self.hidden.iter().any(|h| *h == 0) {
            return Err(invalid("layer widths must be positive"));
        }
        if self.activation != "tanh" {
            return Err(invalid(format!("unsupported activation `{}`", self.activation)));
        }
        if self.log_inputs.iter().any(|i| *i >= self.inputs) {
            return Err(invalid("log-transformed input index out of range"));
        }
        Ok(())
    }

    fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.inputs)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.outputs))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Measured input/target rows with sample weights and split tags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub split: Vec<Split>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, input: Vec<f64>, target: Vec<f64>, weight: f64, split: Split) {
        self.inputs.push(input);
        self.targets.push(target);
        self.weights.push(weight);
        self.split.push(split);
    }

    /// Appends unit-weight rows, tagging a seeded 70/15/15 share of this batch
    /// as train/validation/test.
    pub fn push_batch(&mut self, inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, rng: &mut Rng) {
        let n = inputs.len();
        let n_train = (0.70 * n as f64).round() as usize;
        let n_val = (0.15 * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut tags = vec![Split::Test; n];
        for (rank, &i) in order.iter().enumerate() {
            tags[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        for ((x, y), s) in inputs.into_iter().zip(targets).zip(tags) {
            self.push(x, y, 1.0, s);
        }
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }
}

/// Standardisation statistics. Outputs with zero spread are flagged constant
/// and predicted as their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: Vec<f64>,
    pub out_std: Vec<f64>,
    pub constant: Vec<bool>,
}

fn weighted_stats(rows: &[&[f64]], w: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = w.iter().sum();
    let mut mean = vec![0.0; width];
    for (r, wi) in rows.iter().zip(w) {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += wi * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; width];
    for (r, wi) in rows.iter().zip(w) {
        for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
            *s += wi * (v - m) * (v - m);
        }
    }
    (mean, var.iter().map(|v| (v / total).sqrt()).collect())
}

impl Scaling {
    fn identity(spec: &NetSpec) -> Self {
        Self {
            in_mean: vec![0.0; spec.inputs],
            in_std: vec![1.0; spec.inputs],
            out_mean: vec![0.0; spec.outputs],
            out_std: vec![1.0; spec.outputs],
            constant: vec![false; spec.outputs],
        }
    }

    fn fit(inputs: &[&[f64]], targets: &[&[f64]], w: &[f64], spec: &NetSpec) -> Self {
        let (in_mean, in_std) = weighted_stats(inputs, w, spec.inputs);
        let (out_mean, out_std) = weighted_stats(targets, w, spec.outputs);
        let tiny = |s: f64, m: f64| s <= 1e-12 * m.abs().max(1e-300);
        let constant: Vec<bool> = out_std.iter().zip(&out_mean).map(|(s, m)| tiny(*s, *m)).collect();
        Self {
            in_std: in_std
                .iter()
                .zip(&in_mean)
                .map(|(s, m)| if tiny(*s, *m) { 1.0 } else { *s })
                .collect(),
            in_mean,
            out_std: out_std
                .iter()
                .zip(&constant)
                .map(|(s, c)| if *c { 1.0 } else { *s })
                .collect(),
            out_mean,
            constant,
        }
    }
}

/// One round of the active-learning history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub pool_var: f64,
    pub pool_var_max: f64,
    pub max_mse: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Committee {
    pub tag: String,
    pub spec: NetSpec,
    pub members: Vec<Mlp>,
    pub scaling: Scaling,
    /// Bounding box of the training inputs, raw units; empty before the
    /// first fit.
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
    pub history: Vec<RoundRecord>,
}

/// Committee options beyond the per-network trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommitteeTrainOptions {
    pub net: TrainOptions,
    /// Fraction of the training split given to each member.
    pub subsample: f64,
}

impl Default for CommitteeTrainOptions {
    fn default() -> Self {
        Self {
            net: TrainOptions::default(),
            subsample: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainMetrics {
    /// Validation MSE of each member in target units.
    pub member_val_mse: Vec<f64>,
    pub epochs_run: Vec<usize>,
}

impl TrainMetrics {
    pub fn max_mse(&self) -> f64 {
        self.member_val_mse.iter().copied().fold(0.0, f64::max)
    }
}

/// Committee mean and population variance per output (rows) and input
/// (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: DMatrix<f64>,
    pub variance: DMatrix<f64>,
    pub extrapolated: usize,
}

impl Prediction {
    /// Variance averaged over outputs, one value per input.
    pub fn score(&self) -> Vec<f64> {
        let n = self.variance.nrows() as f64;
        self.variance.column_iter().map(|c| c.sum() / n).collect()
    }
}

pub fn init_committee(tag: &str, spec: NetSpec, n: usize, seed: u64) -> Result<Committee> {
    spec.check()?;
    if n < 2 {
        return Err(invalid("a committee needs at least two members"));
    }
    let sizes = spec.sizes();
    let members = (0..n)
        .map(|i| Mlp::new(&sizes, &mut rng::stream(seed, i as u64)))
        .collect();
    Ok(Committee {
        tag: tag.to_string(),
        scaling: Scaling::identity(&spec),
        input_lo: Vec::new(),
        input_hi: Vec::new(),
        spec,
        members,
        history: Vec::new(),
    })
}

impl Committee {
    fn transform(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for &i in &self.spec.log_inputs {
            v[i] = v[i].ln();
        }
        v
    }

    fn standardised_inputs(&self, rows: &[&[f64]]) -> DMatrix<f64> {
        let s = &self.scaling;
        DMatrix::from_fn(self.spec.inputs, rows.len(), |i, j| {
            let v = self.transform(rows[j])[i];
            (v - s.in_mean[i]) / s.in_std[i]
        })
    }

    fn standardised_targets(&self, rows: &[&[f64]]) -> DMatrix<f64> {
        let s = &self.scaling;
        DMatrix::from_fn(self.spec.outputs, rows.len(), |i, j| {
            if s.constant[i] {
                0.0
            } else {
                (rows[j][i] - s.out_mean[i]) / s.out_std[i]
            }
        })
    }

    fn to_target_units(&self, mut z: DMatrix<f64>) -> DMatrix<f64> {
        let s = &self.scaling;
        for mut col in z.column_iter_mut() {
            for i in 0..col.len() {
                col[i] = if s.constant[i] {
                    s.out_mean[i]
                } else {
                    col[i] * s.out_std[i] + s.out_mean[i]
                };
            }
        }
        z
    }

    /// Trains every member on its own random sub-sample of the training
    /// split, with early stopping on the validation split. Parameters are
    /// carried over between calls; the standardisation is refitted and the
    /// networks rewritten so their functions are unchanged by the refit.
    pub fn train(&mut self, data: &Dataset, opts: &CommitteeTrainOptions, seed: u64) -> Result<TrainMetrics> {
        if data.is_empty() {
            return Err(invalid("cannot train on an empty dataset"));
        }
        if data.inputs.iter().any(|x| x.len() != self.spec.inputs)
            || data.targets.iter().any(|y| y.len() != self.spec.outputs)
        {
            return Err(invalid("dataset width does not match the network"));
        }
        if !(opts.subsample > 0.0 && opts.subsample <= 1.0) {
            return Err(invalid("subsample fraction must be in (0, 1]"));
        }
        let mut train_idx = data.indices(Split::Train);
        if train_idx.is_empty() {
            train_idx = (0..data.len()).collect();
        }
        let val_idx = data.indices(Split::Val);

        if opts.net.epochs == 0 {
            let eval = if val_idx.is_empty() { &train_idx } else { &val_idx };
            let mse = (0..self.members.len()).map(|m| self.member_mse(m, data, eval)).collect();
            return Ok(TrainMetrics {
                member_val_mse: mse,
                epochs_run: vec![0; self.members.len()],
            });
        }

        let xs: Vec<Vec<f64>> = train_idx.iter().map(|&i| self.transform(&data.inputs[i])).collect();
        let x_rows: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let y_rows: Vec<&[f64]> = train_idx.iter().map(|&i| data.targets[i].as_slice()).collect();
        let w: Vec<f64> = train_idx.iter().map(|&i| data.weights[i]).collect();
        let fresh = Scaling::fit(&x_rows, &y_rows, &w, &self.spec);
        let old = std::mem::replace(&mut self.scaling, fresh);
        for m in &mut self.members {
            m.rescale_inputs(&old.in_mean, &old.in_std, &self.scaling.in_mean, &self.scaling.in_std);
            m.rescale_outputs(&old.out_mean, &old.out_std, &self.scaling.out_mean, &self.scaling.out_std);
        }
        self.input_lo = (0..self.spec.inputs)
            .map(|d| data.inputs.iter().map(|x| x[d]).fold(f64::INFINITY, f64::min))
            .collect();
        self.input_hi = (0..self.spec.inputs)
            .map(|d| data.inputs.iter().map(|x| x[d]).fold(f64::NEG_INFINITY, f64::max))
            .collect();

        let all_train: Vec<&[f64]> = train_idx.iter().map(|&i| data.inputs[i].as_slice()).collect();
        let x_train = self.standardised_inputs(&all_train);
        let y_train = self.standardised_targets(&y_rows);
        let val_in: Vec<&[f64]> = val_idx.iter().map(|&i| data.inputs[i].as_slice()).collect();
        let val_out: Vec<&[f64]> = val_idx.iter().map(|&i| data.targets[i].as_slice()).collect();
        let x_val = self.standardised_inputs(&val_in);
        let y_val = self.standardised_targets(&val_out);
        let w_val: Vec<f64> = val_idx.iter().map(|&i| data.weights[i]).collect();

        let n_sub = ((opts.subsample * train_idx.len() as f64).ceil() as usize).clamp(1, train_idx.len());
        let members = std::mem::take(&mut self.members);
        let jobs: Vec<(usize, Mlp)> = members.into_iter().enumerate().collect();
        let trained = par::map(&jobs, |(m, net)| -> Result<(Mlp, usize)> {
            let mut net = net.clone();
            let mut r = rng::stream(seed, *m as u64);
            let mut pick: Vec<usize> = (0..train_idx.len()).collect();
            pick.shuffle(&mut r);
            pick.truncate(n_sub);
            pick.sort_unstable();
            let xs = x_train.select_columns(&pick);
            let ys = y_train.select_columns(&pick);
            let ws: Vec<f64> = pick.iter().map(|&j| w[j]).collect();
            let train = Batch { x: &xs, y: &ys, w: &ws };
            let summary = if val_idx.is_empty() {
                net.train(&train, &train, &opts.net, &mut r)?
            } else {
                let val = Batch { x: &x_val, y: &y_val, w: &w_val };
                net.train(&train, &val, &opts.net, &mut r)?
            };
            Ok((net, summary.epochs_run))
        });
        let mut epochs_run = Vec::with_capacity(trained.len());
        for t in trained {
            let (net, e) = t?;
            self.members.push(net);
            epochs_run.push(e);
        }
        let eval = if val_idx.is_empty() { &train_idx } else { &val_idx };
        let member_val_mse = (0..self.members.len()).map(|m| self.member_mse(m, data, eval)).collect();
        Ok(TrainMetrics {
            member_val_mse,
            epochs_run,
        })
    }

    fn member_mse(&self, m: usize, data: &Dataset, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let rows: Vec<&[f64]> = idx.iter().map(|&i| data.inputs[i].as_slice()).collect();
        let pred = self.to_target_units(self.members[m].forward(&self.standardised_inputs(&rows)));
        let mut acc = 0.0;
        let mut total = 0.0;
        for (j, &i) in idx.iter().enumerate() {
            let e: f64 = (0..self.spec.outputs).map(|o| (pred[(o, j)] - data.targets[i][o]).powi(2)).sum();
            acc += data.weights[i] * e;
            total += data.weights[i];
        }
        acc / (total * self.spec.outputs as f64)
    }

    /// Outputs of every member, in target units.
    pub fn member_outputs(&self, inputs: &[Vec<f64>]) -> Vec<DMatrix<f64>> {
        let rows: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        let x = self.standardised_inputs(&rows);
        self.members.iter().map(|m| self.to_target_units(m.forward(&x))).collect()
    }

    pub fn predict(&self, inputs: &[Vec<f64>]) -> Prediction {
        let p = self.predict_quiet(inputs);
        if p.extrapolated > 0 {
            log::warn!("{}: {} inputs outside the training box", self.tag, p.extrapolated);
        }
        p
    }

    /// [`Self::predict`] without the extrapolation warning.
    pub fn predict_quiet(&self, inputs: &[Vec<f64>]) -> Prediction {
        let extrapolated = inputs
            .iter()
            .filter(|x| {
                !self.input_lo.is_empty()
                    && x.iter().enumerate().any(|(d, v)| *v < self.input_lo[d] || *v > self.input_hi[d])
            })
            .count();
        let outs = self.member_outputs(inputs);
        let k = outs.len() as f64;
        let mut mean = DMatrix::zeros(self.spec.outputs, inputs.len());
        for o in &outs {
            mean += o;
        }
        mean /= k;
        let mut variance = DMatrix::zeros(self.spec.outputs, inputs.len());
        for o in &outs {
            let d = o - &mean;
            variance += d.component_mul(&d);
        }
        variance /= k;
        Prediction {
            mean,
            variance,
            extrapolated,
        }
    }
}
