//! Synthetic mismatch scenarios, evaluation metrics and the end-to-end benchmark.

pub mod bench;
pub mod metrics;
pub mod synthetic;

pub use bench::{run_benchmark, BenchConfig, BenchRecord, BenchReport, Scorer, WilcoxonRow};
pub use metrics::{accuracy, auroc, mean_std, midranks, pearson, wilcoxon_signed_rank, WilcoxonResult};
pub use synthetic::{contaminate, gen_synthetic, Contaminated, SyntheticData, SyntheticSpec};
