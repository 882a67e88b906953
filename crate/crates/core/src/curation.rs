//! Dropping the most harmful fraction of an unlabelled set.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    /// Kept ids in input order.
    pub kept: Vec<String>,
    /// Dropped ids, most harmful first.
    pub dropped: Vec<String>,
    pub drop_fraction: f64,
}

/// `round_half_up(f·n)`, capped at `n`.
pub fn drop_count(fraction: f64, n: usize) -> usize {
    // the small offset absorbs representation error such as 0.35·90 = 31.499…
    let raw = (fraction * n as f64 + 0.5 + 1e-9).floor();
    (raw.max(0.0) as usize).min(n)
}

/// Drop the `round_half_up(f·n)` highest-harm observations. Among equal
/// scores the later row is dropped first, so earlier rows are kept.
pub fn rank_and_filter(scores: &[(String, f64)], drop_fraction: f64) -> Result<FilterDecision> {
    if !(0.0..=1.0).contains(&drop_fraction) {
        return Err(Error::InvalidParameter(format!(
            "drop fraction must lie in [0, 1], got {drop_fraction}"
        )));
    }
    if let Some((id, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite harm for `{id}`")));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].1.total_cmp(&scores[a].1).then(b.cmp(&a)));
    let k = drop_count(drop_fraction, n);
    let dropped_idx: HashSet<usize> = order[..k].iter().copied().collect();
    Ok(FilterDecision {
        kept: (0..n)
            .filter(|i| !dropped_idx.contains(i))
            .map(|i| scores[i].0.clone())
            .collect(),
        dropped: order[..k].iter().map(|&i| scores[i].0.clone()).collect(),
        drop_fraction,
    })
}

/// Rows of `table` whose ids are kept, in table order.
pub fn apply_filter(table: &FeatureTable, decision: &FilterDecision) -> Result<FeatureTable> {
    let position: HashMap<&str, usize> = table.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    for id in decision.kept.iter().chain(&decision.dropped) {
        if !position.contains_key(id.as_str()) {
            return Err(Error::UnknownId(id.clone()));
        }
    }
    let keep: HashSet<&str> = decision.kept.iter().map(String::as_str).collect();
    let indices: Vec<usize> = (0..table.n()).filter(|&i| keep.contains(table.ids()[i].as_str())).collect();
    Ok(table.select(&indices))
}
