use nalgebra::DMatrix;

use super::{loss_and_grad, Dropout, Loss, MlpNet};
use crate::error::Result;

/// Largest relative disagreement between the backpropagated gradient and a
/// central finite difference, over every parameter:
/// `|g_a − g_n| / max(|g_a|, |g_n|, 1e−8)`.
///
/// `masks` pins the dropout pattern so the loss is a deterministic function
/// of the parameters; pass `None` to evaluate without dropout.
pub fn grad_check(
    net: &MlpNet,
    batch: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    loss: Loss,
    epsilon: f64,
    masks: Option<&[DMatrix<f64>]>,
) -> Result<f64> {
    let dropout = || match masks {
        Some(m) => Dropout::Fixed(m),
        None => Dropout::Off,
    };
    let eval = |n: &MlpNet| -> Result<f64> {
        let logits = n.forward(batch, dropout())?;
        Ok(loss_and_grad(loss, &logits, targets)?.0)
    };

    let trace = net.forward_trace(batch, dropout())?;
    let (_, grad_logits) = loss_and_grad(loss, &trace.logits, targets)?;
    let analytic = net.backward(&trace, &grad_logits);

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, (gw, gb)) in analytic.layers.iter().enumerate() {
        for idx in 0..gw.len() {
            let original = probe.layers[k].weights[idx];
            probe.layers[k].weights[idx] = original + epsilon;
            let plus = eval(&probe)?;
            probe.layers[k].weights[idx] = original - epsilon;
            let minus = eval(&probe)?;
            probe.layers[k].weights[idx] = original;
            worst = worst.max(relative_error(gw[idx], (plus - minus) / (2.0 * epsilon)));
        }
        for idx in 0..gb.len() {
            let original = probe.layers[k].bias[idx];
            probe.layers[k].bias[idx] = original + epsilon;
            let plus = eval(&probe)?;
            probe.layers[k].bias[idx] = original - epsilon;
            let minus = eval(&probe)?;
            probe.layers[k].bias[idx] = original;
            worst = worst.max(relative_error(gb[idx], (plus - minus) / (2.0 * epsilon)));
        }
    }
    Ok(worst)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}
