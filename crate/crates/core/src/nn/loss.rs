use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn softmax_rows(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let probs = softmax(&row.iter().copied().collect::<Vec<_>>());
        for (v, p) in row.iter_mut().zip(probs) {
            *v = p;
        }
    }
    out
}

/// Training objectives over a batch of logits and row-wise targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// Mean cross-entropy against (possibly soft) target distributions.
    CrossEntropy,
    /// Mean over rows of the squared error on raw outputs, `Σ_c (z_c − y_c)²`.
    SquaredError,
    /// MixMatch objective: the first `labelled_rows` rows carry cross-entropy,
    /// the rest carry `gamma ×` mean squared distance between the softmax
    /// output and the target distribution.
    MixMatch { labelled_rows: usize, gamma: f64 },
}

/// Loss value and its gradient with respect to the logits.
pub fn loss_and_grad(loss: Loss, logits: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if logits.shape() != targets.shape() {
        return Err(Error::DimensionMismatch {
            expected: logits.len(),
            got: targets.len(),
        });
    }
    let n = logits.nrows();
    let mut grad = DMatrix::zeros(n, logits.ncols());
    if n == 0 {
        return Ok((0.0, grad));
    }
    let value = match loss {
        Loss::SquaredError => {
            let diff = logits - targets;
            grad = &diff * (2.0 / n as f64);
            diff.norm_squared() / n as f64
        }
        Loss::CrossEntropy => cross_entropy_rows(logits, targets, 0..n, n, &mut grad),
        Loss::MixMatch { labelled_rows, gamma } => {
            if labelled_rows > n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: labelled_rows,
                });
            }
            let sup = if labelled_rows > 0 {
                cross_entropy_rows(logits, targets, 0..labelled_rows, labelled_rows, &mut grad)
            } else {
                0.0
            };
            let unlabelled = n - labelled_rows;
            let mut unsup = 0.0;
            if unlabelled > 0 {
                let scale = gamma / unlabelled as f64;
                for i in labelled_rows..n {
                    let row: Vec<f64> = logits.row(i).iter().copied().collect();
                    let p = softmax(&row);
                    let g: Vec<f64> = p
                        .iter()
                        .enumerate()
                        .map(|(c, pc)| 2.0 * scale * (pc - targets[(i, c)]))
                        .collect();
                    unsup += p
                        .iter()
                        .enumerate()
                        .map(|(c, pc)| (pc - targets[(i, c)]).powi(2))
                        .sum::<f64>();
                    // chain rule through softmax: ∂p_c/∂z_k = p_c(δ_ck − p_k)
                    let gp: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
                    for (k, pk) in p.iter().enumerate() {
                        grad[(i, k)] = pk * (g[k] - gp);
                    }
                }
                unsup *= scale;
            }
            sup + unsup
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss(value));
    }
    Ok((value, grad))
}

fn cross_entropy_rows(
    logits: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    rows: std::ops::Range<usize>,
    denom: usize,
    grad: &mut DMatrix<f64>,
) -> f64 {
    let mut total = 0.0;
    for i in rows {
        let row: Vec<f64> = logits.row(i).iter().copied().collect();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        for (c, z) in row.iter().enumerate() {
            let y = targets[(i, c)];
            if y != 0.0 {
                total -= y * (z - log_z);
            }
            grad[(i, c)] = ((z - log_z).exp() - y) / denom as f64;
        }
    }
    total / denom as f64
}
