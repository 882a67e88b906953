//! Feature tables, standardization, pooling and the CSV interchange formats.
//!
//! Feature CSV: header `id,f0,f1,…,f{d−1}[,label]`, one observation per row.
//! Score CSV: header `id,harm`, rows sorted by descending harm.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Floor applied to per-column standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// An n×d matrix of finite features with unique ids and optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    ids: Vec<String>,
    features: Vec<f64>,
    dim: usize,
    labels: Option<Vec<usize>>,
}

impl FeatureTable {
    /// Build a table from row vectors, validating every invariant.
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            Error::check_dim(dim, row.len())?;
            features.extend_from_slice(row);
        }
        Self::from_flat(ids, features, dim, labels)
    }

    /// Build a table from a row-major buffer.
    pub fn from_flat(
        ids: Vec<String>,
        features: Vec<f64>,
        dim: usize,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("feature dimension must be >= 1".into()));
        }
        if features.len() != ids.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dim,
                got: features.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite feature at row {}, column {}",
                i / dim,
                i % dim
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Degenerate(format!("duplicate id `{id}`")));
            }
        }
        if let Some(labels) = &labels {
            Error::check_dim(ids.len(), labels.len())?;
        }
        Ok(Self {
            ids,
            features,
            dim,
            labels,
        })
    }

    /// A table with no rows and the given dimension.
    pub fn empty(dim: usize, with_labels: bool) -> Result<Self> {
        Self::from_flat(Vec::new(), Vec::new(), dim, with_labels.then(Vec::new))
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Row-major feature buffer.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            features,
            dim: self.dim,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Same ids and labels with a new feature buffer of the same shape.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.ids.clone(), features, self.dim, self.labels.clone())
    }

    /// Drop the labels, e.g. before handing a table to an unsupervised scorer.
    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Concatenate two tables of the same dimension. Labels are kept only if both carry them.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        Error::check_dim(self.dim, other.dim)?;
        let ids = self.ids.iter().chain(&other.ids).cloned().collect();
        let features = [self.features.as_slice(), &other.features].concat();
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some([a.as_slice(), b].concat()),
            _ => None,
        };
        Self::from_flat(ids, features, self.dim, labels)
    }

    /// Load a feature CSV. With `expect_labels`, a trailing `label` column is required.
    pub fn load(path: impl AsRef<Path>, expect_labels: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, &path.display().to_string(), expect_labels)
    }

    /// Parse a feature CSV from any reader; `source` names the input in errors.
    pub fn read_csv<R: Read>(reader: R, source: &str, expect_labels: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let parse_err = |line: u64, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        if header.get(0) != Some("id") {
            return Err(parse_err(1, "header must start with `id`".into()));
        }
        let has_labels = header.get(header.len() - 1) == Some("label");
        if expect_labels && !has_labels {
            return Err(Error::MissingLabels(source.to_string()));
        }
        let dim = header.len() - 1 - usize::from(has_labels);
        if dim == 0 {
            return Err(parse_err(1, "no feature columns".into()));
        }

        let mut ids = Vec::new();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut seen = HashSet::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(parse_err(
                    line,
                    format!("expected {} fields, found {}", header.len(), record.len()),
                ));
            }
            let id = record[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId {
                    path: source.to_string(),
                    line,
                    id,
                });
            }
            for j in 0..dim {
                let cell = &record[j + 1];
                let value: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    path: source.to_string(),
                    line,
                    column: header[j + 1].to_string(),
                    value: cell.to_string(),
                })?;
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        path: source.to_string(),
                        line,
                        column: header[j + 1].to_string(),
                        value: cell.to_string(),
                    });
                }
                features.push(value);
            }
            if has_labels {
                let cell = &record[dim + 1];
                let label: usize = cell.parse().map_err(|_| Error::NonNumeric {
                    path: source.to_string(),
                    line,
                    column: "label".into(),
                    value: cell.to_string(),
                })?;
                labels.push(label);
            }
            ids.push(id);
        }
        if ids.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Self::from_flat(ids, features, dim, has_labels.then_some(labels))
    }

    /// Serialize as feature CSV. Values use the shortest exact round-trip representation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim).map(|j| format!("f{j}")));
        if self.labels.is_some() {
            header.push("label".into());
        }
        wtr.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut record = Vec::with_capacity(header.len());
            record.push(self.ids[i].clone());
            record.extend(row.iter().map(|v| v.to_string()));
            if let Some(labels) = &self.labels {
                record.push(labels[i].to_string());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Per-column means and floored standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl StandardizationStats {
    /// Sample mean and standard deviation (n−1 denominator) of every column.
    pub fn fit(table: &FeatureTable) -> Result<Self> {
        let n = table.n();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        let d = table.dim();
        let mut means = vec![0.0; d];
        for row in table.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut vars = vec![0.0; d];
        for row in table.rows() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stddevs = vars
            .into_iter()
            .map(|s| (s / (n - 1) as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { means, stddevs })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stddevs)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// `(x − mean) / stddev` on every entry; ids and labels are untouched.
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        Error::check_dim(self.dim(), table.dim())?;
        let features = table.rows().flat_map(|r| self.apply_row(r)).collect();
        table.with_features(features)
    }
}

/// Average consecutive blocks of `vector` down to `target_dim` entries.
pub fn average_pool_features(vector: &[f64], target_dim: usize) -> Result<Vec<f64>> {
    if target_dim == 0 || vector.is_empty() || vector.len() % target_dim != 0 {
        return Err(Error::InvalidParameter(format!(
            "cannot pool {} features to {target_dim}: dimension must be a positive multiple",
            vector.len()
        )));
    }
    let block = vector.len() / target_dim;
    Ok(vector
        .chunks_exact(block)
        .map(|c| c.iter().sum::<f64>() / block as f64)
        .collect())
}

/// Pool every row of a table.
pub fn average_pool_table(table: &FeatureTable, target_dim: usize) -> Result<FeatureTable> {
    let mut features = Vec::with_capacity(table.n() * target_dim);
    for row in table.rows() {
        features.extend(average_pool_features(row, target_dim)?);
    }
    FeatureTable::from_flat(
        table.ids().to_vec(),
        features,
        target_dim,
        table.labels().map(<[usize]>::to_vec),
    )
}

/// Write `(id, harm)` pairs as a score CSV sorted by descending harm (stable on ties).
pub fn write_scores<W: Write>(writer: W, scores: &[(String, f64)]) -> Result<()> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].1.total_cmp(&scores[a].1));
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "harm"])?;
    for i in order {
        wtr.write_record([scores[i].0.as_str(), &scores[i].1.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_scores(path: impl AsRef<Path>, scores: &[(String, f64)]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_scores(std::io::BufWriter::new(file), scores)
}

/// Read a score CSV back into `(id, harm)` pairs in file order.
pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["id", "harm"] {
        return Err(Error::Parse {
            path: source,
            line: 1,
            message: "score header must be `id,harm`".into(),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let harm: f64 = record[1].parse().map_err(|_| Error::NonNumeric {
            path: source.clone(),
            line,
            column: "harm".into(),
            value: record[1].to_string(),
        })?;
        if !harm.is_finite() {
            return Err(Error::NonFinite {
                path: source.clone(),
                line,
                column: "harm".into(),
                value: record[1].to_string(),
            });
        }
        out.push((record[0].to_string(), harm));
    }
    Ok(out)
}
