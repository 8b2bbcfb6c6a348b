//! Small fully connected regressor with tanh hidden layers and a linear
//! output, trained by mini-batch Adam on a weighted mean squared error.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LayerRepr", into = "LayerRepr")]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Row-major serialised form of a layer.
#[derive(Serialize, Deserialize)]
struct LayerRepr {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<LayerRepr> for Layer {
    fn from(r: LayerRepr) -> Self {
        Layer {
            w: DMatrix::from_row_slice(r.rows, r.cols, &r.weights),
            b: DVector::from_vec(r.bias),
        }
    }
}

impl From<Layer> for LayerRepr {
    fn from(l: Layer) -> Self {
        let (rows, cols) = l.w.shape();
        let mut weights = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                weights.push(l.w[(i, j)]);
            }
        }
        LayerRepr {
            rows,
            cols,
            weights,
            bias: l.b.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Knobs for [`Mlp::train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 400,
            batch_size: 32,
            learning_rate: 3e-3,
            patience: 40,
        }
    }
}

/// Training data as columns: `x` is inputs × samples, `y` outputs × samples.
pub struct Batch<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DMatrix<f64>,
    pub w: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_val_mse: f64,
}

struct Adam {
    m: Vec<(DMatrix<f64>, DVector<f64>)>,
    v: Vec<(DMatrix<f64>, DVector<f64>)>,
    t: i32,
}

impl Mlp {
    /// Glorot-uniform initialisation with zero biases.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        let layers = sizes
            .windows(2)
            .map(|s| {
                let (fan_in, fan_out) = (s[0], s[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    w: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit)),
                    b: DVector::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass on a column batch.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &a;
            for mut col in z.column_iter_mut() {
                col += &layer.b;
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            a = z;
        }
        a
    }

    fn forward_cached(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = vec![x.clone()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * acts.last().expect("input present");
            for mut col in z.column_iter_mut() {
                col += &layer.b;
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Gradient of `Σ_s w_s Σ_o (f_o(x_s) - y_os)² / (W · n_out)` where
    /// `W = total_weight`.
    fn gradient(&self, x: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64], total_weight: f64) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        let acts = self.forward_cached(x);
        let n_out = y.nrows() as f64;
        let mut delta = acts.last().expect("output present") - y;
        for (j, mut col) in delta.column_iter_mut().enumerate() {
            col *= 2.0 * w[j] / (total_weight * n_out);
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = &delta * acts[i].transpose();
            let gb = delta.column_sum();
            if i > 0 {
                let mut back = self.layers[i].w.transpose() * &delta;
                back.zip_apply(&acts[i], |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        grads
    }

    /// Weighted mean squared error over all outputs.
    pub fn mse(&self, x: &DMatrix<f64>, y: &DMatrix<f64>, w: &[f64]) -> f64 {
        if x.ncols() == 0 {
            return 0.0;
        }
        let pred = self.forward(x);
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let d = pred.column(j) - y.column(j);
            acc += wj * d.norm_squared();
        }
        acc / (total * y.nrows() as f64)
    }

    /// Trains in place, keeping the parameters with the best validation
    /// error. Zero epochs leaves the network untouched.
    pub fn train(&mut self, train: &Batch, val: &Batch, opts: &TrainOptions, rng: &mut Rng) -> Result<TrainSummary> {
        let n = train.x.ncols();
        let mut best = self.mse(val.x, val.y, val.w);
        if opts.epochs == 0 || n == 0 {
            return Ok(TrainSummary {
                epochs_run: 0,
                best_val_mse: best,
            });
        }
        let mut best_params = self.layers.clone();
        let mut adam = Adam {
            m: self.layers.iter().map(|l| (l.w.map(|_| 0.0), l.b.map(|_| 0.0))).collect(),
            v: self.layers.iter().map(|l| (l.w.map(|_| 0.0), l.b.map(|_| 0.0))).collect(),
            t: 0,
        };
        let mut order: Vec<usize> = (0..n).collect();
        let bs = opts.batch_size.clamp(1, n);
        let mut stale = 0;
        let mut epochs_run = 0;
        for _ in 0..opts.epochs {
            epochs_run += 1;
            order.shuffle(rng);
            for chunk in order.chunks(bs) {
                let xb = train.x.select_columns(chunk);
                let yb = train.y.select_columns(chunk);
                let wb: Vec<f64> = chunk.iter().map(|&j| train.w[j]).collect();
                let total: f64 = wb.iter().sum();
                if total <= 0.0 {
                    continue;
                }
                let grads = self.gradient(&xb, &yb, &wb, total);
                self.adam_step(&mut adam, &grads, opts.learning_rate);
            }
            let val_mse = self.mse(val.x, val.y, val.w);
            if !val_mse.is_finite() {
                return Err(Error::Diverged(format!("validation loss became {val_mse}")));
            }
            if val_mse < best {
                best = val_mse;
                best_params = self.layers.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= opts.patience {
                    break;
                }
            }
        }
        self.layers = best_params;
        Ok(TrainSummary {
            epochs_run,
            best_val_mse: best,
        })
    }

    fn adam_step(&mut self, adam: &mut Adam, grads: &[(DMatrix<f64>, DVector<f64>)], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        adam.t += 1;
        let c1 = 1.0 - B1.powi(adam.t);
        let c2 = 1.0 - B2.powi(adam.t);
        for (i, (gw, gb)) in grads.iter().enumerate() {
            let (mw, mb) = &mut adam.m[i];
            let (vw, vb) = &mut adam.v[i];
            let layer = &mut self.layers[i];
            let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = B1 * *m + (1.0 - B1) * g;
                *v = B2 * *v + (1.0 - B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            };
            for (((p, m), v), g) in layer.w.iter_mut().zip(mw.iter_mut()).zip(vw.iter_mut()).zip(gw.iter()) {
                update(p, m, v, *g);
            }
            for (((p, m), v), g) in layer.b.iter_mut().zip(mb.iter_mut()).zip(vb.iter_mut()).zip(gb.iter()) {
                update(p, m, v, *g);
            }
        }
    }

    /// Rewrites the first layer so that the network gives the same outputs
    /// when inputs are standardised with `(new_mean, new_std)` instead of
    /// `(old_mean, old_std)`.
    pub fn rescale_inputs(&mut self, old_mean: &[f64], old_std: &[f64], new_mean: &[f64], new_std: &[f64]) {
        let first = &mut self.layers[0];
        for j in 0..first.w.ncols() {
            let shift = (new_mean[j] - old_mean[j]) / old_std[j];
            let scale = new_std[j] / old_std[j];
            for i in 0..first.w.nrows() {
                first.b[i] += first.w[(i, j)] * shift;
                first.w[(i, j)] *= scale;
            }
        }
    }

    /// Counterpart of [`Self::rescale_inputs`] for the output standardisation.
    pub fn rescale_outputs(&mut self, old_mean: &[f64], old_std: &[f64], new_mean: &[f64], new_std: &[f64]) {
        let last = self.layers.last_mut().expect("at least one layer");
        for i in 0..last.w.nrows() {
            let ratio = old_std[i] / new_std[i];
            for j in 0..last.w.ncols() {
                last.w[(i, j)] *= ratio;
            }
            last.b[i] = (old_std[i] * last.b[i] + old_mean[i] - new_mean[i]) / new_std[i];
        }
    }
}
