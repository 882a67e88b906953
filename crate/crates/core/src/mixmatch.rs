//! MixMatch semi-supervised training on feature vectors.
//!
//! Per step: augment the labelled batch once and every unlabelled row `K`
//! times, guess a label for each unlabelled row as the mean prediction over
//! its augmentations, sharpen the guess with temperature `T`, MixUp every
//! row with a partner from the shuffled union of both batches, and descend on
//! cross-entropy over the labelled rows plus `γ ×` squared distance over the
//! unlabelled ones. Guessed labels are constants; no gradient flows through
//! them. An epoch is one pass over the labelled set; unlabelled batches are
//! drawn from a reshuffled cycle over the unlabelled set.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{self, softmax_rows, table_matrix, Dropout, Loss, MlpNet, TrainConfig};
use crate::rng::{self, Rng};
use crate::table::FeatureTable;

#[derive(Debug, Clone, PartialEq)]
pub struct MixMatchConfig {
    /// Augmentations per unlabelled row.
    pub k: usize,
    pub temperature: f64,
    /// Weight of the unlabelled loss term.
    pub gamma: f64,
    /// MixUp Beta(α, α) parameter.
    pub alpha: f64,
    /// Standard deviation of the additive Gaussian augmentation noise.
    pub aug_sigma: f64,
    pub train: TrainConfig,
}

impl Default for MixMatchConfig {
    fn default() -> Self {
        Self {
            k: 2,
            temperature: 0.25,
            gamma: 200.0,
            alpha: 0.75,
            aug_sigma: 0.1,
            train: TrainConfig {
                lr_max: 0.01,
                ..TrainConfig::default()
            },
        }
    }
}

impl MixMatchConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter("temperature must be > 0".into()));
        }
        if !(self.gamma >= 0.0) || !(self.alpha > 0.0) || !(self.aug_sigma >= 0.0) {
            return Err(Error::InvalidParameter(
                "need gamma >= 0, alpha > 0 and augmentation sigma >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub supervised_loss: Vec<f64>,
    pub unsupervised_loss: Vec<f64>,
    pub test_accuracy: Vec<f64>,
}

impl TrainHistory {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.test_accuracy.last().copied()
    }

    /// `epoch,supervised_loss,unsupervised_loss,test_accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,supervised_loss,unsupervised_loss,test_accuracy\n");
        for e in 0..self.test_accuracy.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e + 1,
                self.supervised_loss[e],
                self.unsupervised_loss[e],
                self.test_accuracy[e]
            ));
        }
        out
    }
}

/// `x` plus independent Gaussian noise of scale `sigma` on every coordinate.
pub fn augment(x: &[f64], sigma: f64, rng: &mut Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return x.to_vec();
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and >= 0");
    x.iter().map(|v| v + noise.sample(rng)).collect()
}

/// Mean evaluation-mode prediction over `k` augmentations of `x`.
pub fn guess_label(net: &MlpNet, x: &[f64], k: usize, sigma: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be >= 1".into()));
    }
    let rows: Vec<f64> = (0..k).flat_map(|_| augment(x, sigma, rng)).collect();
    let batch = DMatrix::from_row_slice(k, x.len(), &rows);
    Ok(mean_rows(&net.predict_proba(&batch)?))
}

fn mean_rows(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_mean().iter().copied().collect()
}

/// `p_i^(1/T) / Σ_j p_j^(1/T)`, evaluated in the log domain.
pub fn sharpen(p: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter("temperature must be > 0".into()));
    }
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("sharpen expects nonnegative finite entries".into()));
    }
    if p.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("cannot sharpen an all-zero vector".into()));
    }
    let logs: Vec<f64> = p
        .iter()
        .map(|&v| if v > 0.0 { v.ln() / temperature } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// MixUp with a given coefficient: `λ′ = max(λ, 1 − λ)` weights the first pair.
pub fn mixup_with_lambda(x1: &[f64], y1: &[f64], x2: &[f64], y2: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let l = lambda.max(1.0 - lambda);
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| l * u + (1.0 - l) * v).collect();
    (mix(x1, x2), mix(y1, y2))
}

/// MixUp with `λ ~ Beta(α, α)`.
pub fn mixup(
    x1: &[f64],
    y1: &[f64],
    x2: &[f64],
    y2: &[f64],
    alpha: f64,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Error::check_dim(x1.len(), x2.len())?;
    Error::check_dim(y1.len(), y2.len())?;
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::InvalidParameter(format!("MixUp alpha {alpha}: {e}")))?;
    Ok(mixup_with_lambda(x1, y1, x2, y2, beta.sample(rng)))
}

/// Mean cross-entropy of the labelled logits against their targets plus
/// `γ ×` mean squared Euclidean distance between unlabelled probabilities and
/// their pseudo-labels.
pub fn mixmatch_loss(
    logits_l: &DMatrix<f64>,
    targets_l: &DMatrix<f64>,
    probs_u: &DMatrix<f64>,
    pseudo_u: &DMatrix<f64>,
    gamma: f64,
) -> Result<f64> {
    if logits_l.shape() != targets_l.shape() {
        return Err(Error::DimensionMismatch {
            expected: logits_l.len(),
            got: targets_l.len(),
        });
    }
    if probs_u.shape() != pseudo_u.shape() {
        return Err(Error::DimensionMismatch {
            expected: probs_u.len(),
            got: pseudo_u.len(),
        });
    }
    let supervised = if logits_l.nrows() > 0 {
        let mut total = 0.0;
        for (row, target) in logits_l.row_iter().zip(targets_l.row_iter()) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            total -= row
                .iter()
                .zip(target.iter())
                .filter(|(_, y)| **y != 0.0)
                .map(|(z, y)| y * (z - log_z))
                .sum::<f64>();
        }
        total / logits_l.nrows() as f64
    } else {
        0.0
    };
    let unsupervised = if probs_u.nrows() > 0 {
        (probs_u - pseudo_u).norm_squared() / probs_u.nrows() as f64
    } else {
        0.0
    };
    Ok(supervised + gamma * unsupervised)
}

/// Number of classes implied by the labels of the given tables (at least 2).
pub fn class_count(tables: &[&FeatureTable]) -> usize {
    tables
        .iter()
        .filter_map(|t| t.labels())
        .flat_map(|l| l.iter().copied())
        .max()
        .map_or(2, |m| (m + 1).max(2))
}

/// Fraction of rows of `test` the network classifies correctly.
pub fn evaluate(net: &MlpNet, test: &FeatureTable) -> Result<f64> {
    let labels = test
        .labels()
        .ok_or_else(|| Error::MissingLabels("test table".into()))?;
    let predictions = net.predict(&table_matrix(test))?;
    crate::harness::accuracy(&predictions, labels)
}

/// Endless shuffled pass over `0..n`.
struct Cycler {
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn take(&mut self, count: usize, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

pub fn train_mixmatch(
    labelled: &FeatureTable,
    unlabelled: &FeatureTable,
    test: &FeatureTable,
    config: &MixMatchConfig,
) -> Result<(MlpNet, TrainHistory)> {
    config.validate()?;
    let labels = labelled
        .labels()
        .ok_or_else(|| Error::MissingLabels("labelled table".into()))?;
    if labelled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test.labels().is_none() {
        return Err(Error::MissingLabels("test table".into()));
    }
    let d = labelled.dim();
    Error::check_dim(d, unlabelled.dim())?;
    Error::check_dim(d, test.dim())?;

    let tc = &config.train;
    let classes = class_count(&[labelled, test]);
    let seed = tc.seed;
    let mut net = tc.init_net(d, classes, &mut rng::stream(seed, &[10]))?;
    let mut shuffle_rng = rng::stream(seed, &[11]);
    let mut aug_rng = rng::stream(seed, &[12]);
    let mut mix_rng = rng::stream(seed, &[13]);
    let mut dropout_rng = rng::stream(seed, &[14]);
    let mut state = nn::OptimizerState::new(tc.optimizer, &net);
    let beta = Beta::new(config.alpha, config.alpha)
        .map_err(|e| Error::InvalidParameter(format!("MixUp alpha: {e}")))?;

    let (n_l, n_u) = (labelled.n(), unlabelled.n());
    let batch_l = tc.batch_size.min(n_l);
    let batch_u = tc.batch_size.min(n_u);
    // an epoch is one pass over the labelled set, so the step budget does not
    // depend on how many unlabelled rows survived filtering
    let steps_per_epoch = n_l.div_ceil(tc.batch_size);
    let total = steps_per_epoch * tc.epochs;
    let mut lab_cycle = Cycler::new(n_l);
    let mut unl_cycle = Cycler::new(n_u);
    let mut history = TrainHistory::default();
    let mut step = 0;

    for _ in 0..tc.epochs {
        let (mut sup_sum, mut unsup_sum) = (0.0, 0.0);
        for _ in 0..steps_per_epoch {
            // augmented labelled rows with one-hot targets
            let mut xs: Vec<Vec<f64>> = Vec::with_capacity(batch_l + config.k * batch_u);
            let mut ys: Vec<Vec<f64>> = Vec::with_capacity(xs.capacity());
            for i in lab_cycle.take(batch_l, &mut shuffle_rng) {
                xs.push(augment(labelled.row(i), config.aug_sigma, &mut aug_rng));
                let mut y = vec![0.0; classes];
                y[labels[i]] = 1.0;
                ys.push(y);
            }
            // K augmentations per unlabelled row, all sharing the sharpened guess
            if batch_u > 0 {
                let picked = unl_cycle.take(batch_u, &mut shuffle_rng);
                let mut aug_rows = Vec::with_capacity(config.k * batch_u * d);
                for &j in &picked {
                    for _ in 0..config.k {
                        aug_rows.extend(augment(unlabelled.row(j), config.aug_sigma, &mut aug_rng));
                    }
                }
                let aug = DMatrix::from_row_slice(config.k * batch_u, d, &aug_rows);
                let probs = net.predict_proba(&aug)?;
                for (u, _) in picked.iter().enumerate() {
                    let block = probs.rows(u * config.k, config.k).into_owned();
                    let guess = sharpen(&mean_rows(&block), config.temperature)?;
                    for a in 0..config.k {
                        xs.push(aug.row(u * config.k + a).iter().copied().collect());
                        ys.push(guess.clone());
                    }
                }
            }

            let mut partners: Vec<usize> = (0..xs.len()).collect();
            partners.shuffle(&mut mix_rng);
            let mut batch = Vec::with_capacity(xs.len() * d);
            let mut targets = Vec::with_capacity(xs.len() * classes);
            for (i, &p) in partners.iter().enumerate() {
                let (x, y) = mixup_with_lambda(&xs[i], &ys[i], &xs[p], &ys[p], beta.sample(&mut mix_rng));
                batch.extend(x);
                targets.extend(y);
            }
            let rows = xs.len();
            let batch = DMatrix::from_row_slice(rows, d, &batch);
            let targets = DMatrix::from_row_slice(rows, classes, &targets);
            let lr = tc.lr_at(step, total)?;
            let loss = Loss::MixMatch {
                labelled_rows: batch_l,
                gamma: config.gamma,
            };
            let (_, logits) = nn::step_with_logits(
                &mut net,
                &mut state,
                &batch,
                &targets,
                loss,
                lr,
                tc.weight_decay,
                Dropout::Sample(&mut dropout_rng),
            )?;
            let (sup, unsup) = loss_terms(&logits, &targets, batch_l);
            sup_sum += sup;
            unsup_sum += unsup;
            step += 1;
        }
        history.supervised_loss.push(sup_sum / steps_per_epoch as f64);
        history.unsupervised_loss.push(unsup_sum / steps_per_epoch as f64);
        history.test_accuracy.push(evaluate(&net, test)?);
    }
    Ok((net, history))
}

/// Supervised cross-entropy and unweighted unsupervised squared distance of a mixed batch.
fn loss_terms(logits: &DMatrix<f64>, targets: &DMatrix<f64>, labelled_rows: usize) -> (f64, f64) {
    let n = logits.nrows();
    let probs = softmax_rows(logits);
    let split = |m: &DMatrix<f64>, lo: usize, len: usize| m.rows(lo, len).into_owned();
    let sup = mixmatch_loss(
        &split(logits, 0, labelled_rows),
        &split(targets, 0, labelled_rows),
        &DMatrix::zeros(0, logits.ncols()),
        &DMatrix::zeros(0, logits.ncols()),
        0.0,
    )
    .unwrap_or(f64::NAN);
    let unsup = if n > labelled_rows {
        (split(&probs, labelled_rows, n - labelled_rows) - split(targets, labelled_rows, n - labelled_rows))
            .norm_squared()
            / (n - labelled_rows) as f64
    } else {
        0.0
    };
    (sup, unsup)
}
