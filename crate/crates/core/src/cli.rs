//! The `ssdl-harm` command line.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 on a data or validation
//! error. Every source of randomness is driven by the one `--seed` flag.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::baselines::{train_baseline_head, BaselineMethod, BaselineScorer, DEFAULT_MCD_PASSES};
use crate::curation::{apply_filter, rank_and_filter};
use crate::dedim::{dedim_cosine, DedimConfig};
use crate::density::{DensityModel, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianModel, DEFAULT_SHRINKAGE};
use crate::harness::{run_benchmark, BenchConfig};
use crate::mixmatch::{train_mixmatch, MixMatchConfig};
use crate::nn::TrainConfig;
use crate::table::{load_scores, save_scores, FeatureTable, StandardizationStats};

#[derive(Debug, Parser)]
#[command(
    name = "ssdl-harm",
    version,
    about = "Score, filter and measure unlabelled data for semi-supervised learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    /// Feature-histogram negative log-likelihood (needs --model)
    Fh,
    /// Squared Mahalanobis distance (needs --model)
    Mahalanobis,
    /// One minus the maximum softmax probability (needs --labelled)
    Softmax,
    /// Monte-Carlo-dropout prediction variance (needs --labelled)
    Mcd,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit per-feature histograms on a labelled feature CSV
    FitDensity {
        /// Labelled feature CSV
        #[arg(long)]
        labelled: PathBuf,
        /// Equal-width bins per feature
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a shrunk Gaussian on a labelled feature CSV (in standardized coordinates)
    FitGaussian {
        /// Labelled feature CSV
        #[arg(long)]
        labelled: PathBuf,
        /// Weight of the scaled identity in the covariance
        #[arg(long, default_value_t = DEFAULT_SHRINKAGE)]
        shrinkage: f64,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a harm score for every row of a feature CSV, most harmful first
    Score {
        /// Harm coefficient
        #[arg(long, value_enum)]
        method: Method,
        /// Model file from fit-density or fit-gaussian
        #[arg(long)]
        model: Option<PathBuf>,
        /// Labelled CSV to train the classifier head on (softmax, mcd)
        #[arg(long)]
        labelled: Option<PathBuf>,
        /// Feature CSV to score
        #[arg(long = "in")]
        input: PathBuf,
        /// Score CSV to write
        #[arg(long)]
        out: PathBuf,
        /// Seed of the head training and dropout masks (softmax, mcd)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dropout-enabled forward passes per row (mcd)
        #[arg(long, default_value_t = DEFAULT_MCD_PASSES)]
        mcd_passes: usize,
    },
    /// Drop the most harmful fraction of a feature CSV
    Filter {
        /// Feature CSV to filter
        #[arg(long = "in")]
        input: PathBuf,
        /// Score CSV covering every row of the input
        #[arg(long)]
        scores: PathBuf,
        /// Fraction of rows to drop, in [0, 1]
        #[arg(long)]
        drop_frac: f64,
        /// Filtered feature CSV to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the cosine dissimilarity of two feature CSVs as `mean,std`
    Dedim {
        /// First feature CSV
        #[arg(long)]
        a: PathBuf,
        /// Second feature CSV
        #[arg(long)]
        b: PathBuf,
        /// Rows drawn from each table per round
        #[arg(long, default_value_t = 40)]
        batch: usize,
        /// Rounds to average over
        #[arg(long, default_value_t = 10)]
        batches: usize,
        /// Equal-width bins per feature
        #[arg(long, default_value_t = 16)]
        bins: usize,
        /// Seed of the row draws
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a MixMatch classifier and print its final test accuracy
    Train {
        /// Labelled feature CSV with a label column
        #[arg(long)]
        labelled: PathBuf,
        /// Unlabelled CSV; without it only the labelled term is trained
        #[arg(long)]
        unlabelled: Option<PathBuf>,
        /// Labelled CSV scored for the reported accuracy
        #[arg(long)]
        test: PathBuf,
        /// Weight of the unlabelled loss term
        #[arg(long, default_value_t = 200.0)]
        gamma: f64,
        /// Augmentations per unlabelled row
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Sharpening temperature
        #[arg(long, default_value_t = 0.25)]
        temp: f64,
        /// MixUp Beta parameter
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        /// Standard deviation of the Gaussian feature augmentation
        #[arg(long, default_value_t = 0.1)]
        aug_sigma: f64,
        /// Passes over the labelled set
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        /// Minibatch size of each side [default: 16]
        #[arg(long)]
        batch_size: Option<usize>,
        /// Peak learning rate of the one-cycle schedule
        #[arg(long)]
        lr_max: Option<f64>,
        /// Decoupled weight decay
        #[arg(long, default_value_t = 0.001)]
        weight_decay: f64,
        /// Seed for initialisation, dropout, augmentation and MixUp
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Network file; it accepts raw (unstandardized) features
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch history CSV [default: <out>.history.csv]
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run the synthetic contamination benchmark
    Bench {
        /// Flat key = value file; missing keys keep their defaults
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for records.csv, summary.csv and report.md
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn usage(message: String) -> Failure {
    Failure::Usage(message)
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

/// Parse `argv` (program name first), run the subcommand and return the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let stdout = std::io::stdout();
    match run(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn out_line(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    writeln!(out, "{text}").map_err(|e| Failure::Data(Error::io("<stdout>", e)))
}

fn run(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::FitDensity { labelled, bins, out: path } => {
            DensityModel::fit(&FeatureTable::load(&labelled, false)?, bins)?.save(&path)?;
        }
        Command::FitGaussian {
            labelled,
            shrinkage,
            out: path,
        } => {
            GaussianModel::fit_standardized(&FeatureTable::load(&labelled, false)?, shrinkage)?.save(&path)?;
        }
        Command::Score {
            method,
            model,
            labelled,
            input,
            out: path,
            seed,
            mcd_passes,
        } => {
            let table = FeatureTable::load(&input, false)?;
            let harms = match method {
                Method::Fh | Method::Mahalanobis => {
                    let model = model.ok_or_else(|| usage(format!("--method {} needs --model", method_name(method))))?;
                    if matches!(method, Method::Fh) {
                        DensityModel::load(&model)?.score_table(&table)?
                    } else {
                        GaussianModel::load(&model)?.score_table(&table)?
                    }
                }
                Method::Softmax | Method::Mcd => {
                    let labelled =
                        labelled.ok_or_else(|| usage(format!("--method {} needs --labelled", method_name(method))))?;
                    let kind = if matches!(method, Method::Softmax) {
                        BaselineMethod::Softmax
                    } else {
                        BaselineMethod::Mcd
                    };
                    score_with_head(&FeatureTable::load(&labelled, true)?, &table, kind, mcd_passes, seed)?
                }
            };
            let pairs: Vec<(String, f64)> = table.ids().iter().cloned().zip(harms).collect();
            save_scores(&path, &pairs)?;
        }
        Command::Filter {
            input,
            scores,
            drop_frac,
            out: path,
        } => {
            let table = FeatureTable::load(&input, false)?;
            let scores = load_scores(&scores)?;
            if scores.len() != table.n() {
                return Err(Error::InvalidParameter(format!(
                    "{} scores for {} rows; score every row of the input",
                    scores.len(),
                    table.n()
                ))
                .into());
            }
            apply_filter(&table, &rank_and_filter(&scores, drop_frac)?)?.save(&path)?;
        }
        Command::Dedim {
            a,
            b,
            batch,
            batches,
            bins,
            seed,
        } => {
            let config = DedimConfig {
                batch_size: batch,
                batches,
                bins,
                seed,
            };
            let r = dedim_cosine(&FeatureTable::load(&a, false)?, &FeatureTable::load(&b, false)?, &config)?;
            out_line(out, &format!("{},{}", r.mean, r.std))?;
        }
        Command::Train {
            labelled,
            unlabelled,
            test,
            gamma,
            k,
            temp,
            alpha,
            aug_sigma,
            epochs,
            batch_size,
            lr_max,
            weight_decay,
            seed,
            out: path,
            history,
        } => {
            let defaults = MixMatchConfig::default();
            let config = MixMatchConfig {
                k,
                temperature: temp,
                gamma,
                alpha,
                aug_sigma,
                train: TrainConfig {
                    epochs,
                    batch_size: batch_size.unwrap_or(defaults.train.batch_size),
                    lr_max: lr_max.unwrap_or(defaults.train.lr_max),
                    weight_decay,
                    seed,
                    ..defaults.train
                },
            };
            let labelled = FeatureTable::load(&labelled, true)?;
            let test = FeatureTable::load(&test, true)?;
            let unlabelled = match unlabelled {
                Some(p) => FeatureTable::load(&p, false)?,
                None => FeatureTable::empty(labelled.dim(), false)?,
            };
            let stats = StandardizationStats::fit(&labelled)?;
            let (mut net, hist) = train_mixmatch(
                &stats.apply(&labelled)?,
                &stats.apply(&unlabelled)?,
                &stats.apply(&test)?,
                &config,
            )?;
            net.fold_input_standardization(&stats)?;
            net.save(&path)?;
            let history = history.unwrap_or_else(|| with_suffix(&path, ".history.csv"));
            std::fs::write(&history, hist.to_csv()).map_err(|e| Error::io(&history, e))?;
            out_line(out, &format!("{}", hist.final_accuracy().unwrap_or(f64::NAN)))?;
        }
        Command::Bench { config, out_dir } => {
            let config = match config {
                Some(p) => BenchConfig::load(&p)?,
                None => BenchConfig::default(),
            };
            let report = run_benchmark(&config)?;
            report.write(&out_dir)?;
            let failed = report.records.iter().filter(|r| r.error.is_some()).count();
            out_line(
                out,
                &format!(
                    "{} records ({failed} failed) written to {}",
                    report.records.len(),
                    out_dir.display()
                ),
            )?;
        }
    }
    Ok(())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Fh => "fh",
        Method::Mahalanobis => "mahalanobis",
        Method::Softmax => "softmax",
        Method::Mcd => "mcd",
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Train a head on standardized labelled features, fold the standardization
/// back in and score the raw table.
fn score_with_head(
    labelled: &FeatureTable,
    table: &FeatureTable,
    method: BaselineMethod,
    passes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let stats = StandardizationStats::fit(labelled)?;
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let mut net = train_baseline_head(&stats.apply(labelled)?, &config)?;
    net.fold_input_standardization(&stats)?;
    BaselineScorer::new(net, method, passes)?.score_table(table, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_usage_errors() {
        assert_eq!(dispatch(["ssdl-harm", "--help"]), 0);
        assert_eq!(dispatch(["ssdl-harm", "score", "--help"]), 0);
        assert_eq!(dispatch(["ssdl-harm", "frobnicate"]), 1);
        assert_eq!(dispatch(["ssdl-harm", "dedim", "--a", "x", "--b", "y", "--bogus"]), 1);
        assert_eq!(dispatch(["ssdl-harm"]), 1);
    }

    #[test]
    fn missing_file_is_a_data_error() {
        assert_eq!(
            dispatch(["ssdl-harm", "fit-density", "--labelled", "/nonexistent.csv", "--out", "/tmp/x"]),
            2
        );
    }
}
