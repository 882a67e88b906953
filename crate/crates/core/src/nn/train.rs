use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use nalgebra::DVector;

use super::{loss_and_grad, one_cycle_lr, one_hot, table_matrix, Dropout, Gradients, Loss, MlpNet};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::table::FeatureTable;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub weight_decay: f64,
    pub div: f64,
    pub final_div: f64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub optimizer: Optimizer,
    /// Start the output layer at zero so every initial prediction is uniform.
    pub zero_output: bool,
    pub seed: u64,
}

/// Parameter update rule. Both variants apply weight decay decoupled from
/// the gradient and to weight matrices only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// `w ← w − lr·(∇w + wd·w)`.
    Sgd,
    /// Adam moments on the gradient, then `w ← w − lr·(m̂/(√v̂ + ε) + wd·w)`.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Self = Self::Adam {
        beta1: 0.9,
        beta2: 0.99,
        eps: 1e-5,
    };
}

/// Running state of an [`Optimizer`] for one network.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    steps: i32,
    first: Vec<(DMatrix<f64>, DVector<f64>)>,
    second: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, net: &MlpNet) -> Self {
        let zeros = || {
            net.layers()
                .iter()
                .map(|l| (l.weights.map(|_| 0.0), l.bias.map(|_| 0.0)))
                .collect::<Vec<_>>()
        };
        let (first, second) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (zeros(), zeros()),
        };
        Self {
            kind,
            steps: 0,
            first,
            second,
        }
    }

    pub fn apply(&mut self, net: &mut MlpNet, grads: Gradients, lr: f64, weight_decay: f64) {
        self.steps += 1;
        match self.kind {
            Optimizer::Sgd => {
                for (layer, (gw, gb)) in net.layers_mut().iter_mut().zip(grads.layers) {
                    layer.weights.zip_apply(&gw, |w, g| *w -= lr * (g + weight_decay * *w));
                    layer.bias.zip_apply(&gb, |b, g| *b -= lr * g);
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                let layers = net.layers_mut().iter_mut().zip(grads.layers);
                for ((layer, (gw, gb)), ((m_w, m_b), (v_w, v_b))) in
                    layers.zip(self.first.iter_mut().zip(self.second.iter_mut()))
                {
                    m_w.zip_apply(&gw, |m, g| *m = beta1 * *m + (1.0 - beta1) * g);
                    v_w.zip_apply(&gw, |v, g| *v = beta2 * *v + (1.0 - beta2) * g * g);
                    m_b.zip_apply(&gb, |m, g| *m = beta1 * *m + (1.0 - beta1) * g);
                    v_b.zip_apply(&gb, |v, g| *v = beta2 * *v + (1.0 - beta2) * g * g);
                    for ((w, m), v) in layer.weights.iter_mut().zip(m_w.iter()).zip(v_w.iter()) {
                        *w -= lr * ((m / c1) / ((v / c2).sqrt() + eps) + weight_decay * *w);
                    }
                    for ((b, m), v) in layer.bias.iter_mut().zip(m_b.iter()).zip(v_b.iter()) {
                        *b -= lr * (m / c1) / ((v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            lr_max: 0.05,
            weight_decay: 0.001,
            div: super::DEFAULT_DIV,
            final_div: super::DEFAULT_FINAL_DIV,
            hidden: vec![64, 64],
            dropout: 0.2,
            optimizer: Optimizer::Sgd,
            zero_output: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch size must be >= 1".into()));
        }
        if !(self.lr_max > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter(
                "lr_max must be > 0 and weight decay >= 0".into(),
            ));
        }
        if !(self.div > 0.0 && self.final_div > 0.0) {
            return Err(Error::InvalidParameter("one-cycle divisors must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Layer sizes `[d, hidden…, classes]`.
    pub fn layer_sizes(&self, input: usize, classes: usize) -> Vec<usize> {
        std::iter::once(input)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(classes))
            .collect()
    }

    /// A freshly initialised network for this configuration.
    pub fn init_net(&self, input: usize, classes: usize, rng: &mut Rng) -> Result<MlpNet> {
        let mut net = MlpNet::new(&self.layer_sizes(input, classes), self.dropout, rng)?;
        if self.zero_output {
            let last = net.layers_mut().last_mut().expect("at least one layer");
            last.weights.fill(0.0);
            last.bias.fill(0.0);
        }
        Ok(net)
    }

    pub fn lr_at(&self, step: usize, total: usize) -> Result<f64> {
        one_cycle_lr(step, total, self.lr_max, self.div, self.final_div)
    }
}

/// One gradient-descent step with decoupled weight decay on the weight
/// matrices: `w ← w − lr·(∇w + wd·w)`, `b ← b − lr·∇b`. Returns the loss
/// before the update.
pub fn train_step(
    net: &mut MlpNet,
    batch: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    loss: Loss,
    lr: f64,
    weight_decay: f64,
    dropout: Dropout<'_>,
) -> Result<f64> {
    let mut state = OptimizerState::new(Optimizer::Sgd, net);
    Ok(step_with_logits(net, &mut state, batch, targets, loss, lr, weight_decay, dropout)?.0)
}

/// [`train_step`] that also hands back the logits the loss was computed on.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_with_logits(
    net: &mut MlpNet,
    state: &mut OptimizerState,
    batch: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    loss: Loss,
    lr: f64,
    weight_decay: f64,
    dropout: Dropout<'_>,
) -> Result<(f64, DMatrix<f64>)> {
    let trace = net.forward_trace(batch, dropout)?;
    let (value, grad_logits) = loss_and_grad(loss, &trace.logits, targets)?;
    let grads = net.backward(&trace, &grad_logits);
    state.apply(net, grads, lr, weight_decay);
    Ok((value, trace.logits))
}

/// Plain supervised cross-entropy training on a labelled table.
pub fn train_supervised(labelled: &FeatureTable, classes: usize, config: &TrainConfig) -> Result<MlpNet> {
    config.validate()?;
    let labels = labelled
        .labels()
        .ok_or_else(|| Error::MissingLabels("training table".into()))?;
    if labelled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidParameter(format!("label {bad} outside {classes} classes")));
    }
    let mut net = config.init_net(labelled.dim(), classes, &mut rng::stream(config.seed, &[1]))?;
    let mut shuffle_rng = rng::stream(config.seed, &[2]);
    let mut dropout_rng = rng::stream(config.seed, &[3]);
    let mut state = OptimizerState::new(config.optimizer, &net);

    let x = table_matrix(labelled);
    let y = one_hot(labels, classes);
    let n = labelled.n();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let total = steps_per_epoch * config.epochs;
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0;
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let xb = x.select_rows(chunk);
            let yb = y.select_rows(chunk);
            let lr = config.lr_at(step, total)?;
            step_with_logits(
                &mut net,
                &mut state,
                &xb,
                &yb,
                Loss::CrossEntropy,
                lr,
                config.weight_decay,
                Dropout::Sample(&mut dropout_rng),
            )?;
            step += 1;
        }
    }
    Ok(net)
}
