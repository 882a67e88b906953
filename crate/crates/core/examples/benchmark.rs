//! A reduced benchmark run: two contamination levels, three seeds.

use ssdl_harm::harness::{run_benchmark, BenchConfig, Scorer};

fn main() -> ssdl_harm::Result<()> {
    let config = BenchConfig {
        fractions: vec![0.0, 0.65],
        seeds: (0..3).collect(),
        scorers: vec![Scorer::None, Scorer::Fh, Scorer::Mahalanobis],
        ..BenchConfig::default()
    };
    let report = run_benchmark(&config)?;
    for &f in &config.fractions {
        for &s in &config.scorers {
            if let Some((mean, std)) = report.accuracy_summary(f, s) {
                println!("c={f:<4} {:<12} accuracy {mean:.3} ± {std:.3}", s.name());
            }
        }
    }
    if let Some((mean, _)) = report.supervised_summary() {
        println!("supervised   accuracy {mean:.3}");
    }
    println!("\n{}", report.report_md());
    Ok(())
}
