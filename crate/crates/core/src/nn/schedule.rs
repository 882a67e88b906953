use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_DIV: f64 = 25.0;
pub const DEFAULT_FINAL_DIV: f64 = 1e4;
pub const WARMUP_FRACTION: f64 = 0.3;

fn cosine_interp(start: f64, end: f64, pos: f64) -> f64 {
    end + (start - end) * 0.5 * (1.0 + (PI * pos).cos())
}

/// One-cycle learning rate: cosine warm-up from `lr_max / div` to `lr_max`
/// over the first 30% of steps, then cosine annealing down to
/// `lr_max / (div · final_div)` at the last step.
pub fn one_cycle_lr(step: usize, total_steps: usize, lr_max: f64, div: f64, final_div: f64) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::InvalidParameter(format!(
            "step {step} outside schedule of {total_steps} steps"
        )));
    }
    let start = lr_max / div;
    let end = lr_max / (div * final_div);
    let peak = WARMUP_FRACTION * total_steps as f64;
    let s = step as f64;
    let last = (total_steps - 1) as f64;
    if s < peak {
        Ok(cosine_interp(start, lr_max, s / peak))
    } else if last <= peak {
        Ok(lr_max)
    } else {
        Ok(cosine_interp(lr_max, end, (s - peak) / (last - peak)))
    }
}
