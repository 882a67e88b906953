//! MixMatch on a clean and a contaminated unlabelled set, against the
//! supervised-only limit.

use ssdl_harm::harness::{contaminate, gen_synthetic, SyntheticSpec};
use ssdl_harm::mixmatch::{train_mixmatch, MixMatchConfig};
use ssdl_harm::{FeatureTable, StandardizationStats};

fn main() -> ssdl_harm::Result<()> {
    let spec = SyntheticSpec::default();
    let seed = 2;
    let data = gen_synthetic(&spec, seed)?;
    let stats = StandardizationStats::fit(&data.labelled)?;
    let labelled = stats.apply(&data.labelled)?;
    let test = stats.apply(&data.test)?;

    let mut config = MixMatchConfig::default();
    config.train.seed = seed;

    let supervised = MixMatchConfig { gamma: 0.0, ..config.clone() };
    let empty = FeatureTable::empty(labelled.dim(), false)?;
    let (_, history) = train_mixmatch(&labelled, &empty, &test, &supervised)?;
    println!("supervised only: accuracy {:.3}", history.final_accuracy().unwrap_or(f64::NAN));

    for fraction in [0.0, 0.65] {
        let mixed = contaminate(&data.in_dist_pool, &data.ood_pool, fraction, spec.n_unlabelled, seed)?;
        let unlabelled = stats.apply(&mixed.table)?;
        let (_, history) = train_mixmatch(&labelled, &unlabelled, &test, &config)?;
        println!("\ncontamination {fraction}: accuracy {:.3}", history.final_accuracy().unwrap_or(f64::NAN));
        for line in history.to_csv().lines().step_by(10) {
            println!("  {line}");
        }
    }
    Ok(())
}
