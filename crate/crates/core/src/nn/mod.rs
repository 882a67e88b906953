//! A small fully-connected classifier with hand-written backpropagation.
//!
//! Hidden layers use rectifier activations followed by inverted dropout; the
//! output layer is linear and produces logits. Batches are `n × d` matrices,
//! one observation per row.

mod gradcheck;
mod loss;
mod schedule;
mod train;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

pub use gradcheck::grad_check;
pub use loss::{loss_and_grad, softmax, softmax_rows, Loss};
pub use schedule::{one_cycle_lr, DEFAULT_DIV, DEFAULT_FINAL_DIV, WARMUP_FRACTION};
pub use train::{train_step, train_supervised, Optimizer, OptimizerState, TrainConfig};
pub(crate) use train::step_with_logits;

use crate::density::{join_floats, LineReader};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::table::{FeatureTable, StandardizationStats};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * self.weights.transpose();
        for mut row in z.row_iter_mut() {
            row += self.bias.transpose();
        }
        z
    }
}

/// How dropout behaves during a forward pass.
pub enum Dropout<'a> {
    /// Evaluation mode: no masking, no scaling.
    Off,
    /// Draw fresh Bernoulli masks from the generator.
    Sample(&'a mut Rng),
    /// Reuse masks recorded from an earlier pass (one per hidden layer).
    Fixed(&'a [DMatrix<f64>]),
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input to each layer (after activation and dropout for hidden layers).
    pub inputs: Vec<DMatrix<f64>>,
    /// Hidden-layer pre-activations.
    pub pre: Vec<DMatrix<f64>>,
    /// Scaled dropout masks (`0` or `1/(1−p)`), empty matrices when dropout was off.
    pub masks: Vec<DMatrix<f64>>,
    pub logits: DMatrix<f64>,
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    layers: Vec<Dense>,
    dropout: f64,
}

impl MlpNet {
    /// He-initialized network with `sizes = [d, h1, …, C]`.
    pub fn new(sizes: &[usize], dropout: f64, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "layer sizes need an input and an output, all >= 1".into(),
            ));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
                Dense {
                    weights: DMatrix::from_fn(fan_out, fan_in, |_, _| normal.sample(rng)),
                    bias: DVector::zeros(fan_out),
                }
            })
            .collect();
        Self::from_layers(layers, dropout)
    }

    pub fn from_layers(layers: Vec<Dense>, dropout: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidParameter(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            Error::check_dim(pair[0].outputs(), pair[1].inputs())?;
        }
        for l in &layers {
            Error::check_dim(l.outputs(), l.bias.len())?;
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::Degenerate("non-finite network parameter".into()));
            }
        }
        Ok(Self { layers, dropout })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn set_dropout(&mut self, p: f64) -> Result<()> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("dropout must lie in [0, 1), got {p}")));
        }
        self.dropout = p;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Forward pass keeping intermediate values for backpropagation.
    pub fn forward_trace(&self, x: &DMatrix<f64>, mut dropout: Dropout<'_>) -> Result<Trace> {
        Error::check_dim(self.input_dim(), x.ncols())?;
        let hidden = self.layers.len() - 1;
        if let Dropout::Fixed(masks) = &dropout {
            Error::check_dim(hidden, masks.len())?;
        }
        let keep = 1.0 - self.dropout;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        let mut masks = Vec::with_capacity(hidden);
        let mut current = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&current);
            inputs.push(current);
            if k == hidden {
                return Ok(Trace {
                    inputs,
                    pre,
                    masks,
                    logits: z,
                });
            }
            let mut a = z.map(|v| v.max(0.0));
            let mask = match &mut dropout {
                Dropout::Off => DMatrix::zeros(0, 0),
                Dropout::Sample(_) if self.dropout == 0.0 => DMatrix::zeros(0, 0),
                Dropout::Sample(rng) => {
                    DMatrix::from_fn(a.nrows(), a.ncols(), |_, _| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                }
                Dropout::Fixed(fixed) => {
                    let m = fixed[k].clone();
                    if m.shape() != a.shape() {
                        return Err(Error::DimensionMismatch {
                            expected: a.len(),
                            got: m.len(),
                        });
                    }
                    m
                }
            };
            if !mask.is_empty() {
                a.component_mul_assign(&mask);
            }
            pre.push(z);
            masks.push(mask);
            current = a;
        }
        unreachable!("loop returns at the output layer")
    }

    /// Logits for every row of `x`.
    pub fn forward(&self, x: &DMatrix<f64>, dropout: Dropout<'_>) -> Result<DMatrix<f64>> {
        Ok(self.forward_trace(x, dropout)?.logits)
    }

    /// Backpropagate `grad_logits` (∂L/∂logits) through a recorded trace.
    pub fn backward(&self, trace: &Trace, grad_logits: &DMatrix<f64>) -> Gradients {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut g = grad_logits.clone();
        for k in (0..self.layers.len()).rev() {
            let gw = g.transpose() * &trace.inputs[k];
            let gb = g.row_sum().transpose();
            layers.push((gw, gb));
            if k == 0 {
                break;
            }
            let mut prev = &g * &self.layers[k].weights;
            let mask = &trace.masks[k - 1];
            let z = &trace.pre[k - 1];
            for (idx, v) in prev.iter_mut().enumerate() {
                let m = if mask.is_empty() { 1.0 } else { mask[idx] };
                *v *= if z[idx] > 0.0 { m } else { 0.0 };
            }
            g = prev;
        }
        layers.reverse();
        Gradients { layers }
    }

    /// Class probabilities in evaluation mode.
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(softmax_rows(&self.forward(x, Dropout::Off)?))
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        let logits = self.forward(x, Dropout::Off)?;
        Ok(logits.row_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    /// Absorb an input standardization into the first layer so the network
    /// accepts raw features: `W·((x − m)/s) + b = (W/s)·x + (b − W·(m/s))`.
    pub fn fold_input_standardization(&mut self, stats: &StandardizationStats) -> Result<()> {
        Error::check_dim(self.input_dim(), stats.dim())?;
        let first = &mut self.layers[0];
        for j in 0..first.inputs() {
            let (m, s) = (stats.means[j], stats.stddevs[j]);
            for i in 0..first.outputs() {
                let w = first.weights[(i, j)] / s;
                first.weights[(i, j)] = w;
                first.bias[i] -= w * m;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mlp v1");
        let _ = writeln!(out, "dropout {:.16e}", self.dropout);
        let _ = writeln!(out, "layers {}", self.layers.len());
        for (k, l) in self.layers.iter().enumerate() {
            let _ = writeln!(out, "layer {k} {} {}", l.inputs(), l.outputs());
            for row in l.weights.row_iter() {
                let values: Vec<f64> = row.iter().copied().collect();
                let _ = writeln!(out, "w {}", join_floats(&values));
            }
            let _ = writeln!(out, "b {}", join_floats(l.bias.as_slice()));
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut lines = LineReader::new(text, source);
        lines.expect_exact("mlp v1")?;
        let dropout: f64 = lines.keyed("dropout")?;
        let count: usize = lines.keyed("layers")?;
        let mut layers = Vec::with_capacity(count);
        for k in 0..count {
            let (n, line) = lines.next_line()?;
            let dims: Vec<usize> = line
                .strip_prefix(&format!("layer {k} "))
                .map(|s| s.split_whitespace().filter_map(|t| t.parse().ok()).collect())
                .unwrap_or_default();
            if dims.len() != 2 {
                return Err(lines.error(n, format!("expected `layer {k} <in> <out>`")));
            }
            let (inputs, outputs) = (dims[0], dims[1]);
            let mut w = Vec::with_capacity(inputs * outputs);
            for _ in 0..outputs {
                let row = lines.float_list("w")?;
                Error::check_dim(inputs, row.len())?;
                w.extend(row);
            }
            let b = lines.float_list("b")?;
            Error::check_dim(outputs, b.len())?;
            layers.push(Dense {
                weights: DMatrix::from_row_slice(outputs, inputs, &w),
                bias: DVector::from_vec(b),
            });
        }
        Self::from_layers(layers, dropout)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Row-major table features as an `n × d` matrix.
pub fn table_matrix(table: &FeatureTable) -> DMatrix<f64> {
    DMatrix::from_row_slice(table.n(), table.dim(), table.features())
}

/// One-hot `n × classes` targets.
pub fn one_hot(labels: &[usize], classes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), classes, |i, c| f64::from(u8::from(labels[i] == c)))
}
