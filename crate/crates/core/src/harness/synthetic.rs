//! Synthetic labelled/unlabelled data with controllable distribution mismatch.
//!
//! The target distribution is two Gaussian classes whose centres differ
//! along a class axis spread over the first `signal_dims` features. The last
//! `artifact_dims` features are near-constant in the target data, like an
//! image border, and carry the covariate shift of the OOD source. The
//! in-distribution unlabelled pool holds negatives only (a prior probability
//! shift). The out-of-distribution pool holds negatives translated by the
//! shift vector.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::curation::drop_count;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::table::FeatureTable;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    /// Leading features carrying the class signal.
    pub signal_dims: usize,
    /// Distance between the two class centres, in units of `spread`.
    pub separation: f64,
    /// Per-coordinate standard deviation of both classes outside the artifact features.
    pub spread: f64,
    /// Trailing features that carry the OOD shift.
    pub artifact_dims: usize,
    /// Standard deviation of the artifact features in every pool.
    pub artifact_spread: f64,
    /// Length of the OOD shift vector, in units of `spread`.
    pub shift: f64,
    /// Cosine between the shift vector and the class axis, toward the
    /// positive class; the rest of the shift lies in the artifact features.
    pub shift_alignment: f64,
    pub n_labelled: usize,
    pub n_unlabelled: usize,
    pub n_test: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 16,
            signal_dims: 4,
            separation: 9.0,
            spread: 1.0,
            artifact_dims: 8,
            artifact_spread: 0.25,
            shift: 4.0,
            shift_alignment: 0.0,
            n_labelled: 40,
            n_unlabelled: 90,
            n_test: 62,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.signal_dims == 0 || self.artifact_dims == 0 || self.signal_dims + self.artifact_dims > self.dim {
            return bad("need signal_dims >= 1, artifact_dims >= 1 and signal_dims + artifact_dims <= dim");
        }
        if !(self.spread > 0.0) || !(self.artifact_spread > 0.0) {
            return bad("spreads must be > 0");
        }
        if !(self.separation >= 0.0) || !(self.shift >= 0.0) {
            return bad("separation and shift must be >= 0");
        }
        if !(-1.0..=1.0).contains(&self.shift_alignment) {
            return bad("shift alignment must lie in [-1, 1]");
        }
        if self.n_labelled < 2 || self.n_labelled % 2 != 0 || self.n_test < 2 || self.n_test % 2 != 0 {
            return bad("labelled and test sizes must be even and >= 2 for a balanced split");
        }
        Ok(())
    }

    fn class_axis(&self) -> Vec<f64> {
        let w = 1.0 / (self.signal_dims as f64).sqrt();
        (0..self.dim).map(|j| if j < self.signal_dims { w } else { 0.0 }).collect()
    }

    fn is_artifact(&self, j: usize) -> bool {
        j >= self.dim - self.artifact_dims
    }

    /// Per-coordinate standard deviation.
    pub fn stddevs(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| if self.is_artifact(j) { self.artifact_spread } else { self.spread })
            .collect()
    }

    /// Centre of class `label` (0 = negative, 1 = positive).
    pub fn class_centre(&self, label: usize) -> Vec<f64> {
        let sign = if label == 0 { -0.5 } else { 0.5 };
        self.class_axis()
            .into_iter()
            .map(|a| sign * self.separation * self.spread * a)
            .collect()
    }

    /// Translation of the OOD pool: the aligned part along the class axis,
    /// the remainder spread evenly over the artifact features.
    pub fn shift_vector(&self) -> Vec<f64> {
        let a = self.shift_alignment;
        let length = self.shift * self.spread;
        let along = a * length;
        let across = (1.0 - a * a).max(0.0).sqrt() * length / (self.artifact_dims as f64).sqrt();
        self.class_axis()
            .into_iter()
            .enumerate()
            .map(|(j, e)| if self.is_artifact(j) { across } else { along * e })
            .collect()
    }
}

/// Everything one benchmark cell needs.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub labelled: FeatureTable,
    pub test: FeatureTable,
    pub in_dist_pool: FeatureTable,
    pub ood_pool: FeatureTable,
}

fn sample_rows(centre: &[f64], stddevs: &[f64], n: usize, rng: &mut Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(n * centre.len());
    for _ in 0..n {
        out.extend(centre.iter().zip(stddevs).map(|(c, s)| c + s * noise.sample(rng)));
    }
    out
}

fn balanced(spec: &SyntheticSpec, n: usize, prefix: &str, rng: &mut Rng) -> Result<FeatureTable> {
    let half = n / 2;
    let sd = spec.stddevs();
    let mut features = sample_rows(&spec.class_centre(0), &sd, half, rng);
    features.extend(sample_rows(&spec.class_centre(1), &sd, n - half, rng));
    let labels = (0..n).map(|i| usize::from(i >= half)).collect();
    let ids = (0..n).map(|i| format!("{prefix}{i}")).collect();
    FeatureTable::from_flat(ids, features, spec.dim, Some(labels))
}

pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = rng::stream(seed, &[0x5E7]);
    let labelled = balanced(spec, spec.n_labelled, "l", &mut rng)?;
    let test = balanced(spec, spec.n_test, "t", &mut rng)?;
    let negative = spec.class_centre(0);
    let sd = spec.stddevs();
    let pool = spec.n_unlabelled;
    let in_dist_pool = FeatureTable::from_flat(
        (0..pool).map(|i| format!("u{i}")).collect(),
        sample_rows(&negative, &sd, pool, &mut rng),
        spec.dim,
        None,
    )?;
    let shifted: Vec<f64> = negative.iter().zip(spec.shift_vector()).map(|(c, s)| c + s).collect();
    let ood_pool = FeatureTable::from_flat(
        (0..pool).map(|i| format!("o{i}")).collect(),
        sample_rows(&shifted, &sd, pool, &mut rng),
        spec.dim,
        None,
    )?;
    Ok(SyntheticData {
        labelled,
        test,
        in_dist_pool,
        ood_pool,
    })
}

/// An unlabelled set plus the ground-truth OOD flags used only for evaluation.
#[derive(Debug, Clone)]
pub struct Contaminated {
    pub table: FeatureTable,
    pub ood: Vec<bool>,
}

/// `round_half_up(c·n)` rows from the OOD pool, the rest from the
/// in-distribution pool, shuffled.
pub fn contaminate(
    in_pool: &FeatureTable,
    ood_pool: &FeatureTable,
    fraction: f64,
    n_unlabelled: usize,
    seed: u64,
) -> Result<Contaminated> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "contamination must lie in [0, 1], got {fraction}"
        )));
    }
    Error::check_dim(in_pool.dim(), ood_pool.dim())?;
    let n_ood = drop_count(fraction, n_unlabelled);
    let n_in = n_unlabelled - n_ood;
    if ood_pool.n() < n_ood {
        return Err(Error::InsufficientData {
            needed: n_ood,
            got: ood_pool.n(),
        });
    }
    if in_pool.n() < n_in {
        return Err(Error::InsufficientData {
            needed: n_in,
            got: in_pool.n(),
        });
    }
    let mut rng = rng::stream(seed, &[0xC0, fraction.to_bits()]);
    let pick = |n: usize, k: usize, rng: &mut Rng| rand::seq::index::sample(rng, n, k).into_vec();
    let in_rows = pick(in_pool.n(), n_in, &mut rng);
    let ood_rows = pick(ood_pool.n(), n_ood, &mut rng);
    let mut entries: Vec<(bool, usize)> = in_rows
        .into_iter()
        .map(|i| (false, i))
        .chain(ood_rows.into_iter().map(|i| (true, i)))
        .collect();
    entries.shuffle(&mut rng);

    let mut ids = Vec::with_capacity(n_unlabelled);
    let mut features = Vec::with_capacity(n_unlabelled * in_pool.dim());
    let mut ood = Vec::with_capacity(n_unlabelled);
    for (is_ood, i) in entries {
        let source = if is_ood { ood_pool } else { in_pool };
        ids.push(source.ids()[i].clone());
        features.extend_from_slice(source.row(i));
        ood.push(is_ood);
    }
    Ok(Contaminated {
        table: FeatureTable::from_flat(ids, features, in_pool.dim(), None)?,
        ood,
    })
}
