//! Dataset dissimilarity between the labelled set and increasingly
//! contaminated unlabelled sets.

use ssdl_harm::dedim::{dedim_cosine, DedimConfig};
use ssdl_harm::harness::{contaminate, gen_synthetic, SyntheticSpec};
use ssdl_harm::StandardizationStats;

fn main() -> ssdl_harm::Result<()> {
    let spec = SyntheticSpec::default();
    let config = DedimConfig { batch_size: 40, batches: 10, bins: 16, seed: 1 };
    println!("contamination  dedim mean  dedim std");
    for fraction in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mut means = Vec::new();
        for seed in 0..5 {
            let data = gen_synthetic(&spec, seed)?;
            let stats = StandardizationStats::fit(&data.labelled)?;
            let mixed = contaminate(&data.in_dist_pool, &data.ood_pool, fraction, spec.n_unlabelled, seed)?;
            let labelled = stats.apply(&data.labelled)?;
            let unlabelled = stats.apply(&mixed.table)?;
            means.push(dedim_cosine(&labelled, &unlabelled, &config)?.mean);
        }
        let (mean, std) = ssdl_harm::harness::mean_std(&means);
        println!("{fraction:>13.2}  {mean:>10.3}  {std:>9.3}");
    }
    Ok(())
}
