//! Feature-histogram (FH) harm coefficient.
//!
//! Each labelled feature dimension gets its own normalized equal-width
//! histogram. Dimensions are treated as independent, so the likelihood of a
//! query is the product of per-dimension bin probabilities and the harm is its
//! negative logarithm.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::table::FeatureTable;

pub const DEFAULT_BINS: usize = 16;
/// Probability assigned to empty bins and out-of-range values.
pub const PROB_FLOOR: f64 = 1e-6;
/// Width of the single bin used for a constant dimension.
pub const DEGENERATE_WIDTH: f64 = 1e-8;

/// Equal-width histogram of one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    probs: Vec<f64>,
}

impl Histogram {
    /// Histogram of `values` over `[lo, hi]` with `bins` equal-width bins.
    ///
    /// A zero-width range collapses to one bin of width [`DEGENERATE_WIDTH`]
    /// centred on `lo`. Probabilities are empirical frequencies floored at
    /// `floor` without renormalization.
    pub fn fit(values: &[f64], lo: f64, hi: f64, bins: usize, floor: f64) -> Self {
        let edges = equal_width_edges(lo, hi, bins);
        let mut counts = vec![0usize; edges.len() - 1];
        for &v in values {
            if let Some(k) = bin_index(&edges, v) {
                counts[k] += 1;
            }
        }
        let n = values.len().max(1) as f64;
        let probs = counts
            .into_iter()
            .map(|c| (c as f64 / n).max(floor))
            .collect();
        Self { edges, probs }
    }

    pub fn from_parts(edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if edges.len() != probs.len() + 1 || probs.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "histogram needs B+1 edges for B probabilities (got {} edges, {} probs)",
                edges.len(),
                probs.len()
            )));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("histogram edges must be strictly increasing".into()));
        }
        if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::InvalidParameter("bin probabilities must lie in (0, 1]".into()));
        }
        Ok(Self { edges, probs })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn bins(&self) -> usize {
        self.probs.len()
    }

    /// Probability of the bin containing `value`, or `floor` outside the range.
    pub fn prob(&self, value: f64, floor: f64) -> f64 {
        bin_index(&self.edges, value).map_or(floor, |k| self.probs[k])
    }
}

/// `bins + 1` strictly increasing edges spanning `[lo, hi]`.
pub(crate) fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    if hi > lo {
        let width = hi - lo;
        let mut edges: Vec<f64> = (0..bins)
            .map(|k| lo + width * k as f64 / bins as f64)
            .collect();
        edges.push(hi);
        if edges.windows(2).all(|w| w[0] < w[1]) {
            return edges;
        }
    }
    let centre = 0.5 * (lo + hi);
    let mut left = centre - 0.5 * DEGENERATE_WIDTH;
    let mut right = centre + 0.5 * DEGENERATE_WIDTH;
    if left >= centre {
        left = centre - centre.abs() * f64::EPSILON;
    }
    if right <= centre {
        right = centre + centre.abs() * f64::EPSILON;
    }
    vec![left, right]
}

/// Bin containing `value`. An edge belongs to the bin on its right, except
/// the last edge which closes the final bin.
pub(crate) fn bin_index(edges: &[f64], value: f64) -> Option<usize> {
    let last = *edges.last()?;
    if !(value >= edges[0] && value <= last) {
        return None;
    }
    let bins = edges.len() - 1;
    let k = edges.partition_point(|&e| e <= value);
    Some((k - 1).min(bins - 1))
}

/// Per-dimension normalized histograms of labelled features.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    dims: Vec<Histogram>,
    floor: f64,
}

impl DensityModel {
    /// Fit one `bins`-bin histogram per dimension over the labelled min/max range.
    pub fn fit(labelled: &FeatureTable, bins: usize) -> Result<Self> {
        Self::fit_with_floor(labelled, bins, PROB_FLOOR)
    }

    pub fn fit_with_floor(labelled: &FeatureTable, bins: usize, floor: f64) -> Result<Self> {
        if labelled.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if labelled.n() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: labelled.n(),
            });
        }
        if bins < 1 {
            return Err(Error::InvalidParameter("bin count must be >= 1".into()));
        }
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(Error::InvalidParameter("probability floor must lie in (0, 1]".into()));
        }
        let dims = (0..labelled.dim())
            .map(|j| {
                let values: Vec<f64> = labelled.column(j).collect();
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Histogram::fit(&values, lo, hi, bins, floor)
            })
            .collect();
        Ok(Self { dims, floor })
    }

    pub fn from_parts(dims: Vec<Histogram>, floor: f64) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter("density model needs at least one dimension".into()));
        }
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(Error::InvalidParameter("probability floor must lie in (0, 1]".into()));
        }
        Ok(Self { dims, floor })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn histograms(&self) -> &[Histogram] {
        &self.dims
    }

    /// Negative log-likelihood of `h` under the independent per-dimension densities.
    pub fn harm(&self, h: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), h.len())?;
        Ok(self
            .dims
            .iter()
            .zip(h)
            .map(|(hist, &v)| -hist.prob(v, self.floor).ln())
            .sum())
    }

    /// Harm of every row, in row order.
    pub fn score_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), table.dim())?;
        table.rows().map(|r| self.harm(r)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "density-model v1");
        let _ = writeln!(out, "dims {}", self.dim());
        let _ = writeln!(out, "floor {:.16e}", self.floor);
        for (r, hist) in self.dims.iter().enumerate() {
            let _ = writeln!(out, "dim {r} bins {}", hist.bins());
            let _ = writeln!(out, "edges {}", join_floats(&hist.edges));
            let _ = writeln!(out, "probs {}", join_floats(&hist.probs));
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut lines = LineReader::new(text, source);
        lines.expect_exact("density-model v1")?;
        let d: usize = lines.keyed("dims")?;
        let floor: f64 = lines.keyed("floor")?;
        let mut dims = Vec::with_capacity(d);
        for r in 0..d {
            let (line_no, line) = lines.next_line()?;
            let expected_prefix = format!("dim {r} bins ");
            let bins: usize = line
                .strip_prefix(&expected_prefix)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| lines.error(line_no, format!("expected `{expected_prefix}<B>`")))?;
            let edges = lines.float_list("edges")?;
            let probs = lines.float_list("probs")?;
            if probs.len() != bins {
                return Err(lines.error(line_no, format!("declared {bins} bins, found {}", probs.len())));
            }
            dims.push(Histogram::from_parts(edges, probs)?);
        }
        Self::from_parts(dims, floor)
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

/// Free-function form of [`DensityModel::fit`].
pub fn fit_feature_histograms(labelled: &FeatureTable, bins: usize) -> Result<DensityModel> {
    DensityModel::fit(labelled, bins)
}

pub fn harm_fh(model: &DensityModel, h: &[f64]) -> Result<f64> {
    model.harm(h)
}

pub fn score_table_fh(model: &DensityModel, table: &FeatureTable) -> Result<Vec<f64>> {
    model.score_table(table)
}

pub(crate) fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Line cursor over the structured text model formats.
pub(crate) struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a str,
}

impl<'a> LineReader<'a> {
    pub(crate) fn new(text: &'a str, source: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            source,
        }
    }

    pub(crate) fn error(&self, line: u64, message: String) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line,
            message,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<(u64, &'a str)> {
        for (i, line) in self.lines.by_ref() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Ok((i as u64 + 1, line));
            }
        }
        Err(Error::Parse {
            path: self.source.to_string(),
            line: 0,
            message: "unexpected end of file".into(),
        })
    }

    pub(crate) fn expect_exact(&mut self, expected: &str) -> Result<()> {
        let (n, line) = self.next_line()?;
        if line == expected {
            Ok(())
        } else {
            Err(self.error(n, format!("expected `{expected}`")))
        }
    }

    pub(crate) fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, line) = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| self.error(n, format!("expected `{key} <value>`")))
    }

    pub(crate) fn float_list(&mut self, key: &str) -> Result<Vec<f64>> {
        let (n, line) = self.next_line()?;
        let rest = line
            .strip_prefix(key)
            .ok_or_else(|| self.error(n, format!("expected `{key} ...`")))?;
        rest.split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.error(n, format!("bad number `{tok}`")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_table(values: &[f64]) -> FeatureTable {
        FeatureTable::new(
            (0..values.len()).map(|i| format!("r{i}")).collect(),
            values.iter().map(|&v| vec![v]).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn uniform_four_bins() {
        let m = DensityModel::fit(&column_table(&[0., 1., 2., 3.]), 4).unwrap();
        assert_eq!(m.histograms()[0].probs(), &[0.25; 4]);
        assert!((m.harm(&[1.5]).unwrap() - 1.3863).abs() < 1e-4);
        assert!((m.harm(&[1.5]).unwrap() + 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn edge_values_go_right_except_last() {
        let edges = [0.0, 1.0, 2.0];
        assert_eq!(bin_index(&edges, 0.0), Some(0));
        assert_eq!(bin_index(&edges, 1.0), Some(1));
        assert_eq!(bin_index(&edges, 2.0), Some(1));
        assert_eq!(bin_index(&edges, 2.0 + 1e-12), None);
        assert_eq!(bin_index(&edges, -1e-12), None);
    }

    #[test]
    fn out_of_range_gets_floor() {
        let m = DensityModel::fit(&column_table(&[0., 1., 2., 3.]), 4).unwrap();
        let h = m.harm(&[10.0]).unwrap();
        assert!((h - 13.8155).abs() < 1e-4);
    }

    #[test]
    fn constant_column_degenerate_bin() {
        let m = DensityModel::fit(&column_table(&[2.5, 2.5, 2.5]), 8).unwrap();
        let hist = &m.histograms()[0];
        assert_eq!(hist.bins(), 1);
        assert_eq!(hist.probs(), &[1.0]);
        assert!((hist.edges()[1] - hist.edges()[0] - DEGENERATE_WIDTH).abs() < 1e-12);
        assert_eq!(m.harm(&[2.5]).unwrap(), 0.0);
    }

    #[test]
    fn two_dims_independent() {
        let t = FeatureTable::new(
            (0..4).map(|i| format!("r{i}")).collect(),
            vec![vec![0., 10.], vec![1., 20.], vec![2., 30.], vec![3., 40.]],
            None,
        )
        .unwrap();
        let m = DensityModel::fit(&t, 4).unwrap();
        for hist in m.histograms() {
            assert!((hist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let h = m.harm(&[1.5, 25.0]).unwrap();
        assert!((h - 2.7726).abs() < 1e-4);
    }

    #[test]
    fn errors() {
        let t = column_table(&[0., 1.]);
        assert!(DensityModel::fit(&t, 0).is_err());
        assert!(matches!(
            DensityModel::fit(&FeatureTable::empty(1, false).unwrap(), 4),
            Err(Error::EmptyDataset)
        ));
        let m = DensityModel::fit(&t, 2).unwrap();
        assert!(matches!(m.harm(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_table_scores_empty() {
        let m = DensityModel::fit(&column_table(&[0., 1.]), 2).unwrap();
        assert!(m.score_table(&FeatureTable::empty(1, false).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = column_table(&[0.1, 0.7, 1.0 / 3.0, 2.9, 2.2]);
        let m = DensityModel::fit(&t, 3).unwrap();
        let back = DensityModel::from_text(&m.to_text(), "mem").unwrap();
        assert_eq!(m, back);
    }
}
