//! Mahalanobis harm coefficient.
//!
//! A single Gaussian is fitted to the pooled labelled features. The sample
//! covariance is shrunk toward a scaled identity,
//! `Σ_λ = (1 − λ)·Σ + λ·(tr Σ / d)·I`, which keeps it invertible when there
//! are fewer labelled rows than feature dimensions. Harm is the squared
//! Mahalanobis distance to the labelled mean.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::density::{join_floats, LineReader};
use crate::error::{Error, Result};
use crate::table::{FeatureTable, StandardizationStats};

pub const DEFAULT_SHRINKAGE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    shrinkage: f64,
}

fn check_shrinkage(shrinkage: f64) -> Result<()> {
    if (0.0..=1.0).contains(&shrinkage) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "shrinkage must lie in [0, 1], got {shrinkage}"
        )))
    }
}

/// `(1 − λ)·Σ + λ·(tr Σ / d)·I`
pub fn shrink_covariance(cov: &DMatrix<f64>, shrinkage: f64) -> DMatrix<f64> {
    let d = cov.nrows();
    let scale = cov.trace() / d as f64;
    let mut out = cov * (1.0 - shrinkage);
    for i in 0..d {
        out[(i, i)] += shrinkage * scale;
    }
    out
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
/// `None` if the factorization fails or a pivot is not safely positive.
fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = Cholesky::<f64, Dyn>::new(m.clone())?;
    let l = chol.l_dirty();
    let max_diag = m.diagonal().amax();
    let min_pivot = (0..m.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > max_diag * 1e-12) {
        return None;
    }
    let mut inv = chol.inverse();
    inv = (&inv + inv.transpose()) * 0.5;
    Some(inv)
}

/// Sample mean and covariance (n−1 denominator).
fn sample_moments(table: &FeatureTable) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = (table.n(), table.dim());
    let x = DMatrix::from_row_slice(n, d, table.features());
    let mean = x.row_mean().transpose();
    let mut centred = x;
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centred.tr_mul(&centred) / (n as f64 - 1.0);
    (mean, cov)
}

impl GaussianModel {
    /// Fit mean and shrunk covariance on labelled features and factor the precision.
    pub fn fit(labelled: &FeatureTable, shrinkage: f64) -> Result<Self> {
        if labelled.n() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: labelled.n(),
            });
        }
        check_shrinkage(shrinkage)?;
        let (mean, cov) = sample_moments(labelled);
        let regularized = shrink_covariance(&cov, shrinkage);
        Self::from_regularized(mean.as_slice().to_vec(), regularized, shrinkage)
    }

    /// Fit in the labelled set's standardized coordinates and express the
    /// model in raw coordinates: raw queries then get the harm their
    /// standardized versions would. With `S = diag(stddevs)` the covariance
    /// maps to `S·Σ_λ·S` and the mean back to the labelled mean.
    pub fn fit_standardized(labelled: &FeatureTable, shrinkage: f64) -> Result<Self> {
        let stats = StandardizationStats::fit(labelled)?;
        let z = Self::fit(&stats.apply(labelled)?, shrinkage)?;
        let s = DVector::from_column_slice(&stats.stddevs);
        let mean: Vec<f64> = z
            .mean
            .iter()
            .zip(&stats.means)
            .zip(&stats.stddevs)
            .map(|((v, m), sd)| m + sd * v)
            .collect();
        let covariance = DMatrix::from_fn(z.dim(), z.dim(), |i, j| s[i] * z.covariance[(i, j)] * s[j]);
        Self::from_regularized(mean, covariance, shrinkage)
    }

    /// Build a model from a mean and an already-shrunk covariance `Σ_λ`.
    pub fn from_regularized(mean: Vec<f64>, covariance: DMatrix<f64>, shrinkage: f64) -> Result<Self> {
        check_shrinkage(shrinkage)?;
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("model needs at least one dimension".into()));
        }
        if covariance.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: covariance.nrows(),
            });
        }
        // symmetrize away round-off so the factorization sees an exactly symmetric matrix
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        let precision = spd_inverse(&covariance).ok_or(Error::NotPositiveDefinite { shrinkage })?;
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance,
            precision,
            shrinkage,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// The shrunk covariance `Σ_λ`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// `(mean − h)ᵀ Σ_λ⁻¹ (mean − h)`, without a square root.
    pub fn harm(&self, h: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), h.len())?;
        let diff = DVector::from_iterator(h.len(), self.mean.iter().zip(h).map(|(m, v)| m - v));
        Ok((&self.precision * &diff).dot(&diff).max(0.0))
    }

    pub fn score_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), table.dim())?;
        table.rows().map(|r| self.harm(r)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "gaussian-model v1");
        let _ = writeln!(out, "dims {}", self.dim());
        let _ = writeln!(out, "shrinkage {:.16e}", self.shrinkage);
        let _ = writeln!(out, "mean {}", join_floats(self.mean.as_slice()));
        for row in self.covariance.row_iter() {
            let values: Vec<f64> = row.iter().copied().collect();
            let _ = writeln!(out, "cov {}", join_floats(&values));
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut lines = LineReader::new(text, source);
        lines.expect_exact("gaussian-model v1")?;
        let d: usize = lines.keyed("dims")?;
        let shrinkage: f64 = lines.keyed("shrinkage")?;
        let mean = lines.float_list("mean")?;
        Error::check_dim(d, mean.len())?;
        let mut cov = Vec::with_capacity(d * d);
        for _ in 0..d {
            let row = lines.float_list("cov")?;
            Error::check_dim(d, row.len())?;
            cov.extend(row);
        }
        Self::from_regularized(mean, DMatrix::from_row_slice(d, d, &cov), shrinkage)
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

pub fn fit_gaussian(labelled: &FeatureTable, shrinkage: f64) -> Result<GaussianModel> {
    GaussianModel::fit(labelled, shrinkage)
}

pub fn harm_mahalanobis(model: &GaussianModel, h: &[f64]) -> Result<f64> {
    model.harm(h)
}

pub fn score_table_mahalanobis(model: &GaussianModel, table: &FeatureTable) -> Result<Vec<f64>> {
    model.score_table(table)
}
