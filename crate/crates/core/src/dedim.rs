//! Batch-sampled cosine density dissimilarity between two feature tables.
//!
//! Each round draws `batch_size` rows from both tables, builds per-dimension
//! histograms over the range the two batches share, concatenates each side's
//! bin probabilities into one vector and takes the cosine distance. The
//! result is the mean and spread of that distance over rounds.

use rand::seq::index;

use crate::density::{Histogram, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::rng;
use crate::table::FeatureTable;

pub const DEFAULT_BATCH_SIZE: usize = 40;
pub const DEFAULT_BATCHES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DedimConfig {
    pub batch_size: usize,
    pub batches: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for DedimConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            batches: DEFAULT_BATCHES,
            bins: crate::density::DEFAULT_BINS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedimResult {
    pub mean: f64,
    /// Sample standard deviation over rounds (0 for a single round).
    pub std: f64,
    pub batch_size: usize,
    pub batches: usize,
    pub seed: u64,
    pub per_round: Vec<f64>,
}

/// Row indices drawn for one round. Depends only on `(seed, round, n)`, so
/// both tables of a pair, and the pair in either order, see the same draws.
fn round_indices(seed: u64, round: usize, n: usize, batch_size: usize) -> Vec<usize> {
    let mut rng = rng::stream(seed, &[0xDED1, round as u64]);
    index::sample(&mut rng, n, batch_size).into_vec()
}

/// Concatenated per-dimension bin probabilities of the batch rows.
fn density_vector(table: &FeatureTable, rows: &[usize], ranges: &[(f64, f64)], bins: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(ranges.len() * bins);
    for (j, &(lo, hi)) in ranges.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|&i| table.row(i)[j]).collect();
        out.extend_from_slice(Histogram::fit(&values, lo, hi, bins, PROB_FLOOR).probs());
    }
    out
}

/// `1 − u·v / (‖u‖‖v‖)`, clamped to `[0, 1]` for nonnegative inputs.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    Error::check_dim(u.len(), v.len())?;
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("zero-norm density vector".into()));
    }
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 1.0))
}

pub fn dedim_cosine(a: &FeatureTable, b: &FeatureTable, config: &DedimConfig) -> Result<DedimResult> {
    Error::check_dim(a.dim(), b.dim())?;
    let nb = config.batch_size;
    if nb == 0 || config.batches == 0 || config.bins == 0 {
        return Err(Error::InvalidParameter(
            "batch size, batch count and bins must all be >= 1".into(),
        ));
    }
    for t in [a, b] {
        if t.n() < nb {
            return Err(Error::InsufficientData {
                needed: nb,
                got: t.n(),
            });
        }
    }

    let d = a.dim();
    let mut per_round = Vec::with_capacity(config.batches);
    for round in 0..config.batches {
        let rows_a = round_indices(config.seed, round, a.n(), nb);
        let rows_b = round_indices(config.seed, round, b.n(), nb);
        let ranges: Vec<(f64, f64)> = (0..d)
            .map(|j| {
                rows_a
                    .iter()
                    .map(|&i| a.row(i)[j])
                    .chain(rows_b.iter().map(|&i| b.row(i)[j]))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            })
            .collect();
        let u = density_vector(a, &rows_a, &ranges, config.bins);
        let v = density_vector(b, &rows_b, &ranges, config.bins);
        per_round.push(cosine_distance(&u, &v)?);
    }

    let k = per_round.len() as f64;
    let mean = per_round.iter().sum::<f64>() / k;
    let std = if per_round.len() > 1 {
        (per_round.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(DedimResult {
        mean,
        std,
        batch_size: nb,
        batches: config.batches,
        seed: config.seed,
        per_round,
    })
}
