//! Mahalanobis harm and the effect of covariance shrinkage.

use ssdl_harm::gaussian::GaussianModel;
use ssdl_harm::harness::{auroc, contaminate, gen_synthetic, SyntheticSpec};
use ssdl_harm::StandardizationStats;

fn main() -> ssdl_harm::Result<()> {
    // a weak shift and few labelled rows per dimension, where the raw covariance is noisy
    let spec = SyntheticSpec { n_labelled: 24, shift: 1.5, ..SyntheticSpec::default() };
    let data = gen_synthetic(&spec, 3)?;
    let stats = StandardizationStats::fit(&data.labelled)?;
    let labelled = stats.apply(&data.labelled)?;
    let mixed = contaminate(&data.in_dist_pool, &data.ood_pool, 0.5, spec.n_unlabelled, 3)?;
    let unlabelled = stats.apply(&mixed.table)?;

    for shrinkage in [0.0, 0.1, 0.5, 1.0] {
        let model = GaussianModel::fit(&labelled, shrinkage)?;
        let harm = model.score_table(&unlabelled)?;
        let at_mean = model.harm(model.mean())?;
        println!(
            "shrinkage {shrinkage:.1}: AUROC {:.3}, harm at the mean {at_mean:.1e}",
            auroc(&harm, &mixed.ood)?
        );
    }

    let model = GaussianModel::fit(&labelled, 0.1)?;
    println!("\nsaved model:\n{}", model.to_text().lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
