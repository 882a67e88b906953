//! Output-based harm scores from a classifier trained on the labelled set:
//! one minus the maximum softmax probability, and the dispersion of
//! Monte-Carlo-dropout predictions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::nn::{self, softmax, table_matrix, Dropout, MlpNet, TrainConfig};
use crate::rng::{self, Rng};
use crate::table::FeatureTable;

pub const DEFAULT_MCD_PASSES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Softmax,
    Mcd,
}

/// A trained head plus the scoring rule to apply with it.
#[derive(Debug, Clone)]
pub struct BaselineScorer {
    pub net: MlpNet,
    pub method: BaselineMethod,
    pub mcd_passes: usize,
}

impl BaselineScorer {
    pub fn new(net: MlpNet, method: BaselineMethod, mcd_passes: usize) -> Result<Self> {
        if method == BaselineMethod::Mcd && mcd_passes < 2 {
            return Err(Error::InvalidParameter("MC dropout needs at least 2 passes".into()));
        }
        Ok(Self {
            net,
            method,
            mcd_passes,
        })
    }

    /// Harm of every row. Row `i` of an MCD run uses its own stream derived
    /// from `(seed, i)`, so results do not depend on evaluation order.
    pub fn score_table(&self, table: &FeatureTable, seed: u64) -> Result<Vec<f64>> {
        Error::check_dim(self.net.input_dim(), table.dim())?;
        match self.method {
            BaselineMethod::Softmax => table.rows().map(|r| harm_softmax(&self.net, r)).collect(),
            BaselineMethod::Mcd => table
                .rows()
                .enumerate()
                .map(|(i, r)| harm_mcd(&self.net, r, self.mcd_passes, &mut rng::stream(seed, &[0x3CD, i as u64])))
                .collect(),
        }
    }
}

/// Supervised head on the labelled features; needs at least two classes.
pub fn train_baseline_head(labelled: &FeatureTable, config: &TrainConfig) -> Result<MlpNet> {
    let labels = labelled
        .labels()
        .ok_or_else(|| Error::MissingLabels("labelled table".into()))?;
    if labelled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(Error::Degenerate("baseline head needs at least two classes".into()));
    }
    let classes = labels.iter().max().map_or(2, |m| m + 1);
    nn::train_supervised(labelled, classes, config)
}

/// `1 − max softmax` of the evaluation-mode prediction.
pub fn harm_softmax(net: &MlpNet, x: &[f64]) -> Result<f64> {
    let logits = net.forward(&DMatrix::from_row_slice(1, x.len(), x), Dropout::Off)?;
    let probs = softmax(logits.as_slice());
    Ok(1.0 - probs.iter().copied().fold(0.0, f64::max))
}

/// Mean over classes of the sample variance (n−1) of softmax outputs across
/// `passes` dropout-enabled forward passes.
pub fn harm_mcd(net: &MlpNet, x: &[f64], passes: usize, rng: &mut Rng) -> Result<f64> {
    if passes < 2 {
        return Err(Error::InvalidParameter("MC dropout needs at least 2 passes".into()));
    }
    let row = DMatrix::from_row_slice(1, x.len(), x);
    let mut probs = Vec::with_capacity(passes);
    for _ in 0..passes {
        let logits = net.forward(&row, Dropout::Sample(rng))?;
        probs.push(softmax(logits.as_slice()));
    }
    Ok(mean_class_variance(&probs))
}

/// Mean over classes of the per-class sample variance across passes.
/// Welford updates keep the result exactly zero when all passes agree.
pub fn mean_class_variance(probs: &[Vec<f64>]) -> f64 {
    let classes = probs[0].len();
    let total: f64 = (0..classes)
        .map(|c| {
            let (mut mean, mut m2) = (0.0, 0.0);
            for (i, p) in probs.iter().enumerate() {
                let delta = p[c] - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (p[c] - mean);
            }
            m2 / (probs.len() - 1) as f64
        })
        .sum();
    total / classes as f64
}

/// Softmax harm of a whole table in one batched forward pass.
pub fn score_table_softmax(net: &MlpNet, table: &FeatureTable) -> Result<Vec<f64>> {
    let probs = net.predict_proba(&table_matrix(table))?;
    Ok(probs
        .row_iter()
        .map(|r| 1.0 - r.iter().copied().fold(0.0, f64::max))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use nalgebra::DVector;

    fn constant_net(classes: usize, dropout: f64) -> MlpNet {
        MlpNet::from_layers(
            vec![
                Dense {
                    weights: DMatrix::zeros(4, 2),
                    bias: DVector::from_element(4, 1.0),
                },
                Dense {
                    weights: DMatrix::zeros(classes, 4),
                    bias: DVector::zeros(classes),
                },
            ],
            dropout,
        )
        .unwrap()
    }

    #[test]
    fn softmax_harm_on_uniform_outputs() {
        assert!((harm_softmax(&constant_net(2, 0.0), &[0.3, 0.1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((harm_softmax(&constant_net(3, 0.0), &[0.3, 0.1]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn confident_limit() {
        let mut net = constant_net(2, 0.0);
        net.layers_mut()[1].bias[0] = 60.0;
        assert!(harm_softmax(&net, &[0.0, 0.0]).unwrap() < 1e-20);
    }

    #[test]
    fn mcd_without_dropout_is_zero() {
        let mut rng = rng::seeded(1);
        let net = MlpNet::new(&[2, 8, 2], 0.0, &mut rng).unwrap();
        assert_eq!(harm_mcd(&net, &[0.4, -1.0], 20, &mut rng).unwrap(), 0.0);
        assert!(harm_mcd(&net, &[0.4, -1.0], 1, &mut rng).is_err());
    }

    #[test]
    fn two_pass_variance() {
        let v = mean_class_variance(&[vec![0.4, 0.6], vec![0.6, 0.4]]);
        assert!((v - 0.02).abs() < 1e-15);
    }

    #[test]
    fn one_class_head_rejected() {
        let t = FeatureTable::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0], vec![1.0]],
            Some(vec![1, 1]),
        )
        .unwrap();
        assert!(matches!(
            train_baseline_head(&t, &TrainConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }
}
