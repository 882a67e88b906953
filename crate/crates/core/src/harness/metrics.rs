//! Evaluation statistics: accuracy, AUROC, Pearson correlation and the
//! Wilcoxon signed-rank test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample for which Wilcoxon p-values are computed exactly.
pub const WILCOXON_EXACT_MAX: usize = 20;

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    Error::check_dim(labels.len(), predictions.len())?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve for `scores` separating `positive == true` rows,
/// via the Mann-Whitney rank-sum with midranks for ties.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    Error::check_dim(scores.len(), positive.len())?;
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("AUROC needs both classes present".into()));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    Error::check_dim(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation undefined for a constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Sum of ranks of negative differences.
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired samples `a − b`.
///
/// Zero differences are dropped. Up to [`WILCOXON_EXACT_MAX`] pairs the
/// p-value comes from enumerating all sign assignments over the observed
/// (mid)ranks; above that a tie-corrected normal approximation is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    Error::check_dim(a.len(), b.len())?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let n = diffs.len();
    let ranks = midranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let centre = total / 2.0;
    let observed = (w_plus - centre).abs();

    let (p_value, exact) = if n <= WILCOXON_EXACT_MAX {
        // ranks are multiples of 1/2, so work in doubled integer units
        let doubled: Vec<u64> = ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
        let max_sum: u64 = doubled.iter().sum();
        let mut counts = vec![0u64; max_sum as usize + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r as usize..=max_sum as usize).rev() {
                counts[s] += counts[s - r as usize];
            }
        }
        let threshold = observed * 2.0;
        let centre2 = max_sum as f64 / 2.0;
        let extreme: u64 = counts
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as f64 - centre2).abs() >= threshold - 1e-9)
            .map(|(_, c)| c)
            .sum();
        (extreme as f64 / 2f64.powi(n as i32), true)
    } else {
        let mut tie_term = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let nf = n as f64;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = observed / var.sqrt();
        let normal = Normal::standard();
        (2.0 * (1.0 - normal.cdf(z)), false)
    };
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        n,
        p_value: p_value.min(1.0),
        exact,
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1], &[0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn auroc_examples() {
        let flags = [false, false, true, true];
        assert_eq!(auroc(&[1., 2., 3., 4.], &flags).unwrap(), 1.0);
        assert_eq!(auroc(&[5.; 4], &flags).unwrap(), 0.5);
        assert_eq!(auroc(&[3., 1., 2., 4.], &flags).unwrap(), 0.75);
        assert!(auroc(&[1., 2.], &[true, true]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0];
        assert!((pearson(&xs, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &[1.0, 2.0, 4.0]).unwrap() - 0.9819).abs() < 1e-4);
        assert!(pearson(&xs, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn wilcoxon_all_positive_ten() {
        let a: Vec<f64> = (1..=10).map(|i| i as f64 + 0.5).collect();
        let b: Vec<f64> = (1..=10).map(|i| i as f64 * 0.9).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.w_minus, 0.0);
        assert!(r.exact);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_degenerate() {
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = vec![0.0; 30];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact);
        assert!((0.0..=1.0).contains(&r.p_value));
    }
}
