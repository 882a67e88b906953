//! Drop the most harmful rows and count how many shifted rows survive.

use ssdl_harm::curation::{apply_filter, rank_and_filter};
use ssdl_harm::density::DensityModel;
use ssdl_harm::harness::{contaminate, gen_synthetic, SyntheticSpec};
use ssdl_harm::StandardizationStats;

fn main() -> ssdl_harm::Result<()> {
    let spec = SyntheticSpec::default();
    let data = gen_synthetic(&spec, 11)?;
    let stats = StandardizationStats::fit(&data.labelled)?;
    let labelled = stats.apply(&data.labelled)?;
    let mixed = contaminate(&data.in_dist_pool, &data.ood_pool, 0.35, spec.n_unlabelled, 11)?;
    let unlabelled = stats.apply(&mixed.table)?;

    let model = DensityModel::fit(&labelled, 16)?;
    let scores: Vec<(String, f64)> = unlabelled.ids().iter().cloned().zip(model.score_table(&unlabelled)?).collect();
    let shifted: std::collections::HashSet<&str> = unlabelled
        .ids()
        .iter()
        .zip(&mixed.ood)
        .filter(|(_, &o)| o)
        .map(|(id, _)| id.as_str())
        .collect();

    println!("{} rows, {} shifted", unlabelled.n(), shifted.len());
    for fraction in [0.1, 0.2, 0.35, 0.5] {
        let decision = rank_and_filter(&scores, fraction)?;
        let kept = apply_filter(&unlabelled, &decision)?;
        let left = kept.ids().iter().filter(|id| shifted.contains(id.as_str())).count();
        println!("drop {fraction:.2}: kept {} rows, {left} of them shifted", kept.n());
    }
    Ok(())
}
