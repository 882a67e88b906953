//! Output-based harm from a classifier head: maximum softmax probability and
//! Monte-Carlo dropout, compared with the feature-histogram score.

use ssdl_harm::baselines::{train_baseline_head, BaselineMethod, BaselineScorer};
use ssdl_harm::density::DensityModel;
use ssdl_harm::harness::{auroc, contaminate, gen_synthetic, SyntheticSpec};
use ssdl_harm::nn::TrainConfig;
use ssdl_harm::StandardizationStats;

fn main() -> ssdl_harm::Result<()> {
    let spec = SyntheticSpec::default();
    let data = gen_synthetic(&spec, 5)?;
    let stats = StandardizationStats::fit(&data.labelled)?;
    let labelled = stats.apply(&data.labelled)?;
    let mixed = contaminate(&data.in_dist_pool, &data.ood_pool, 0.5, spec.n_unlabelled, 5)?;
    let unlabelled = stats.apply(&mixed.table)?;

    let head = train_baseline_head(&labelled, &TrainConfig { seed: 5, ..TrainConfig::default() })?;
    for (name, method) in [("softmax", BaselineMethod::Softmax), ("mcd", BaselineMethod::Mcd)] {
        let scorer = BaselineScorer::new(head.clone(), method, 20)?;
        let harm = scorer.score_table(&unlabelled, 5)?;
        println!("{name:<8} AUROC {:.3}", auroc(&harm, &mixed.ood)?);
    }
    let fh = DensityModel::fit(&labelled, 16)?.score_table(&unlabelled)?;
    println!("{:<8} AUROC {:.3}", "fh", auroc(&fh, &mixed.ood)?);
    Ok(())
}
