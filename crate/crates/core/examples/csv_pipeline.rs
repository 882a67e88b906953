//! The file-based workflow: write CSVs, fit a model, save scores, filter.

use ssdl_harm::curation::{apply_filter, rank_and_filter};
use ssdl_harm::density::DensityModel;
use ssdl_harm::harness::{contaminate, gen_synthetic, SyntheticSpec};
use ssdl_harm::table::{average_pool_table, load_scores, save_scores};
use ssdl_harm::FeatureTable;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("ssdl-harm-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let spec = SyntheticSpec::default();
    let data = gen_synthetic(&spec, 4)?;
    let mixed = contaminate(&data.in_dist_pool, &data.ood_pool, 0.35, spec.n_unlabelled, 4)?;
    data.labelled.save(dir.join("labelled.csv"))?;
    mixed.table.save(dir.join("unlabelled.csv"))?;

    let labelled = FeatureTable::load(dir.join("labelled.csv"), true)?;
    let unlabelled = FeatureTable::load(dir.join("unlabelled.csv"), false)?;
    // wide embeddings can be average-pooled down before scoring
    let (labelled, unlabelled) = (average_pool_table(&labelled, 8)?, average_pool_table(&unlabelled, 8)?);

    let model = DensityModel::fit(&labelled, 16)?;
    model.save(dir.join("density.txt"))?;
    let model = DensityModel::load(dir.join("density.txt"))?;
    let scores: Vec<(String, f64)> = unlabelled.ids().iter().cloned().zip(model.score_table(&unlabelled)?).collect();
    save_scores(dir.join("scores.csv"), &scores)?;

    let decision = rank_and_filter(&load_scores(dir.join("scores.csv"))?, 0.35)?;
    let kept = apply_filter(&unlabelled, &decision)?;
    kept.save(dir.join("filtered.csv"))?;
    println!("kept {} of {} rows, files in {}", kept.n(), unlabelled.n(), dir.display());
    println!("most harmful: {:?}", &decision.dropped[..5.min(decision.dropped.len())]);
    Ok(())
}
