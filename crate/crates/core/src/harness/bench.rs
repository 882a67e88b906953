//! End-to-end benchmark: contaminate, score, filter, train, evaluate.
//!
//! Every cell of contamination fraction × scorer × seed is independent given
//! its seed, so seeds run on worker threads and the report is assembled in a
//! fixed order afterwards. Records are byte-identical across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::{score_table_softmax, train_baseline_head, BaselineMethod, BaselineScorer};
use crate::curation::{apply_filter, rank_and_filter};
use crate::dedim::{dedim_cosine, DedimConfig};
use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::gaussian::GaussianModel;
use crate::mixmatch::{train_mixmatch, MixMatchConfig};
use crate::nn::{MlpNet, Optimizer, TrainConfig};
use crate::table::{FeatureTable, StandardizationStats};

use super::metrics::{auroc, mean_std, pearson, wilcoxon_signed_rank};
use super::synthetic::{contaminate, gen_synthetic, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scorer {
    /// No filtering.
    None,
    Fh,
    Mahalanobis,
    Softmax,
    Mcd,
}

impl Scorer {
    pub const ALL: [Scorer; 5] = [Scorer::None, Scorer::Fh, Scorer::Mahalanobis, Scorer::Softmax, Scorer::Mcd];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::None => "none",
            Scorer::Fh => "fh",
            Scorer::Mahalanobis => "mahalanobis",
            Scorer::Softmax => "softmax",
            Scorer::Mcd => "mcd",
        }
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scorer::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scorer `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub synthetic: SyntheticSpec,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub scorers: Vec<Scorer>,
    pub mixmatch: MixMatchConfig,
    /// Training setup of the head behind the softmax and MCD scorers.
    pub baseline: TrainConfig,
    pub bins: usize,
    pub shrinkage: f64,
    pub mcd_passes: usize,
    pub dedim_batch: usize,
    pub dedim_batches: usize,
    pub dedim_bins: usize,
    /// Also train with an empty unlabelled set and γ = 0.
    pub supervised: bool,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSpec::default(),
            fractions: vec![0.0, 0.35, 0.65, 1.0],
            seeds: (0..10).collect(),
            scorers: Scorer::ALL.to_vec(),
            mixmatch: MixMatchConfig::default(),
            baseline: TrainConfig::default(),
            bins: crate::density::DEFAULT_BINS,
            shrinkage: crate::gaussian::DEFAULT_SHRINKAGE,
            mcd_passes: crate::baselines::DEFAULT_MCD_PASSES,
            dedim_batch: 40,
            dedim_batches: 10,
            dedim_bins: 16,
            supervised: true,
            threads: 0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_value(key, v))
        .collect()
}

impl BenchConfig {
    /// Parse a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; unknown keys are errors. Keys not given keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let s = &mut c.synthetic;
            let m = &mut c.mixmatch;
            match key {
                "seeds" => {
                    c.seeds = if value.contains(',') {
                        parse_list(key, value)?
                    } else {
                        (0..parse_value::<u64>(key, value)?).collect()
                    }
                }
                "fractions" => c.fractions = parse_list(key, value)?,
                "scorers" => c.scorers = parse_list(key, value)?,
                "dim" => s.dim = parse_value(key, value)?,
                "signal_dims" => s.signal_dims = parse_value(key, value)?,
                "separation" => s.separation = parse_value(key, value)?,
                "spread" => s.spread = parse_value(key, value)?,
                "artifact_dims" => s.artifact_dims = parse_value(key, value)?,
                "artifact_spread" => s.artifact_spread = parse_value(key, value)?,
                "shift" => s.shift = parse_value(key, value)?,
                "shift_alignment" => s.shift_alignment = parse_value(key, value)?,
                "n_labelled" => s.n_labelled = parse_value(key, value)?,
                "n_unlabelled" => s.n_unlabelled = parse_value(key, value)?,
                "n_test" => s.n_test = parse_value(key, value)?,
                "k" => m.k = parse_value(key, value)?,
                "temperature" => m.temperature = parse_value(key, value)?,
                "gamma" => m.gamma = parse_value(key, value)?,
                "alpha" => m.alpha = parse_value(key, value)?,
                "aug_sigma" => m.aug_sigma = parse_value(key, value)?,
                "epochs" => m.train.epochs = parse_value(key, value)?,
                "batch_size" => m.train.batch_size = parse_value(key, value)?,
                "lr_max" => m.train.lr_max = parse_value(key, value)?,
                "weight_decay" => {
                    m.train.weight_decay = parse_value(key, value)?;
                    c.baseline.weight_decay = m.train.weight_decay;
                }
                "dropout" => {
                    m.train.dropout = parse_value(key, value)?;
                    c.baseline.dropout = m.train.dropout;
                }
                "hidden" => {
                    m.train.hidden = parse_list(key, value)?;
                    c.baseline.hidden = m.train.hidden.clone();
                }
                "optimizer" => {
                    m.train.optimizer = match value {
                        "sgd" => Optimizer::Sgd,
                        "adam" => Optimizer::ADAM,
                        _ => return Err(Error::InvalidParameter(format!("unknown optimizer `{value}`"))),
                    }
                }
                "zero_output" => {
                    m.train.zero_output = parse_value(key, value)?;
                    c.baseline.zero_output = m.train.zero_output;
                }
                "baseline_epochs" => c.baseline.epochs = parse_value(key, value)?,
                "baseline_batch_size" => c.baseline.batch_size = parse_value(key, value)?,
                "baseline_lr_max" => c.baseline.lr_max = parse_value(key, value)?,
                "bins" => c.bins = parse_value(key, value)?,
                "shrinkage" => c.shrinkage = parse_value(key, value)?,
                "mcd_passes" => c.mcd_passes = parse_value(key, value)?,
                "dedim_batch" => c.dedim_batch = parse_value(key, value)?,
                "dedim_batches" => c.dedim_batches = parse_value(key, value)?,
                "dedim_bins" => c.dedim_bins = parse_value(key, value)?,
                "supervised" => c.supervised = parse_value(key, value)?,
                "threads" => c.threads = parse_value(key, value)?,
                _ => return Err(Error::InvalidParameter(format!("unknown config key `{key}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.mixmatch.validate()?;
        self.baseline.validate()?;
        if self.fractions.is_empty() || self.seeds.is_empty() || self.scorers.is_empty() {
            return Err(Error::InvalidParameter("fractions, seeds and scorers must be non-empty".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::InvalidParameter(format!("fraction {f} outside [0, 1]")));
        }
        Ok(())
    }
}

/// One benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub fraction: f64,
    pub scorer: Scorer,
    pub seed: u64,
    pub accuracy: Option<f64>,
    /// DeDiM between the labelled set and the unfiltered unlabelled set.
    pub dedim_mean: Option<f64>,
    pub dedim_std: Option<f64>,
    /// Separation of OOD rows by the harm scores; absent when only one kind is present.
    pub auroc: Option<f64>,
    /// Unlabelled rows left after filtering.
    pub kept: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonRow {
    pub fraction: f64,
    pub a: Scorer,
    pub b: Scorer,
    pub pairs: usize,
    /// Mean of `accuracy(a) − accuracy(b)` over paired seeds.
    pub mean_difference: f64,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    /// Ordered by fraction, then scorer, then seed, as in the config.
    pub records: Vec<BenchRecord>,
    /// Supervised-only accuracy per seed, when enabled.
    pub supervised: Vec<(u64, Result<f64, String>)>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

impl BenchReport {
    fn cells(&self, fraction: f64, scorer: Scorer) -> impl Iterator<Item = &BenchRecord> {
        self.records
            .iter()
            .filter(move |r| r.fraction == fraction && r.scorer == scorer)
    }

    /// Per-seed accuracies of one condition, `None` for failed cells.
    pub fn accuracies(&self, fraction: f64, scorer: Scorer) -> Vec<Option<f64>> {
        self.cells(fraction, scorer).map(|r| r.accuracy).collect()
    }

    /// Mean and sample std of the successful cells of one condition.
    pub fn accuracy_summary(&self, fraction: f64, scorer: Scorer) -> Option<(f64, f64)> {
        let ok: Vec<f64> = self.accuracies(fraction, scorer).into_iter().flatten().collect();
        (!ok.is_empty()).then(|| mean_std(&ok))
    }

    pub fn mean_auroc(&self, fraction: f64, scorer: Scorer) -> Option<f64> {
        let v: Vec<f64> = self.cells(fraction, scorer).filter_map(|r| r.auroc).collect();
        (!v.is_empty()).then(|| mean_std(&v).0)
    }

    pub fn supervised_summary(&self) -> Option<(f64, f64)> {
        let ok: Vec<f64> = self.supervised.iter().filter_map(|(_, a)| a.as_ref().ok().copied()).collect();
        (!ok.is_empty()).then(|| mean_std(&ok))
    }

    /// Pearson correlation between DeDiM and unfiltered accuracy over every
    /// fraction and seed.
    pub fn dedim_accuracy_pearson(&self) -> Result<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .records
            .iter()
            .filter(|r| r.scorer == Scorer::None)
            .filter_map(|r| Some((r.dedim_mean?, r.accuracy?)))
            .unzip();
        pearson(&xs, &ys)
    }

    /// Paired Wilcoxon test of accuracies of `a` against `b` at `fraction`.
    pub fn wilcoxon(&self, fraction: f64, a: Scorer, b: Scorer) -> WilcoxonRow {
        let pairs: Vec<(f64, f64)> = self
            .accuracies(fraction, a)
            .into_iter()
            .zip(self.accuracies(fraction, b))
            .filter_map(|(x, y)| Some((x?, y?)))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mean_difference = if pairs.is_empty() {
            f64::NAN
        } else {
            pairs.iter().map(|(x, y)| x - y).sum::<f64>() / pairs.len() as f64
        };
        WilcoxonRow {
            fraction,
            a,
            b,
            pairs: pairs.len(),
            mean_difference,
            p_value: wilcoxon_signed_rank(&xs, &ys).ok().map(|w| w.p_value),
        }
    }

    /// Wilcoxon rows for every scorer pair at every fraction.
    pub fn wilcoxon_table(&self) -> Vec<WilcoxonRow> {
        let scorers = &self.config.scorers;
        let mut rows = Vec::new();
        for &f in &self.config.fractions {
            for (i, &a) in scorers.iter().enumerate() {
                for &b in &scorers[i + 1..] {
                    rows.push(self.wilcoxon(f, a, b));
                }
            }
        }
        rows
    }

    pub fn records_csv(&self) -> String {
        let mut out = String::from("fraction,scorer,seed,accuracy,dedim_mean,dedim_std,auroc,kept,error\n");
        for r in &self.records {
            let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.fraction,
                r.scorer.name(),
                r.seed,
                fmt_opt(r.accuracy),
                fmt_opt(r.dedim_mean),
                fmt_opt(r.dedim_std),
                fmt_opt(r.auroc),
                r.kept,
                error
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("fraction,scorer,runs,failed,accuracy_mean,accuracy_std,dedim_mean,auroc_mean\n");
        if let Some((m, s)) = self.supervised_summary() {
            let failed = self.supervised.iter().filter(|(_, a)| a.is_err()).count();
            let _ = writeln!(out, ",supervised,{},{failed},{m},{s},,", self.supervised.len());
        }
        for &f in &self.config.fractions {
            for &sc in &self.config.scorers {
                let cells: Vec<&BenchRecord> = self.cells(f, sc).collect();
                let failed = cells.iter().filter(|r| r.accuracy.is_none()).count();
                let (m, s) = self.accuracy_summary(f, sc).map_or((None, None), |(m, s)| (Some(m), Some(s)));
                let dedim: Vec<f64> = cells.iter().filter_map(|r| r.dedim_mean).collect();
                let dedim = (!dedim.is_empty()).then(|| mean_std(&dedim).0);
                let _ = writeln!(
                    out,
                    "{f},{},{},{failed},{},{},{},{}",
                    sc.name(),
                    cells.len(),
                    fmt_opt(m),
                    fmt_opt(s),
                    fmt_opt(dedim),
                    fmt_opt(self.mean_auroc(f, sc))
                );
            }
        }
        out
    }

    pub fn report_md(&self) -> String {
        let pm = |v: Option<(f64, f64)>| v.map_or_else(|| "n/a".to_string(), |(m, s)| format!("{m:.3} ± {s:.3}"));
        let mut out = String::new();
        let s = &self.config.synthetic;
        let _ = writeln!(out, "# Benchmark report\n");
        let _ = writeln!(
            out,
            "d = {}, n_l = {}, n_u = {}, n_test = {}, shift = {}× spread, seeds = {}\n",
            s.dim,
            s.n_labelled,
            s.n_unlabelled,
            s.n_test,
            s.shift,
            self.config.seeds.len()
        );

        let _ = writeln!(out, "## Test accuracy (mean ± std over seeds)\n");
        let header: Vec<&str> = self.config.scorers.iter().map(|s| s.name()).collect();
        let _ = writeln!(out, "| contamination | {} |", header.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(header.len()));
        if self.config.supervised {
            let _ = writeln!(
                out,
                "| supervised only | {} |",
                vec![pm(self.supervised_summary()); header.len()].join(" | ")
            );
        }
        for &f in &self.config.fractions {
            let cells: Vec<String> = self
                .config
                .scorers
                .iter()
                .map(|&sc| pm(self.accuracy_summary(f, sc)))
                .collect();
            let _ = writeln!(out, "| {:.0}% OOD | {} |", f * 100.0, cells.join(" | "));
        }

        let _ = writeln!(out, "\n## OOD separation (mean AUROC of harm scores)\n");
        let scored: Vec<Scorer> = self.config.scorers.iter().copied().filter(|&s| s != Scorer::None).collect();
        let names: Vec<&str> = scored.iter().map(|s| s.name()).collect();
        let _ = writeln!(out, "| contamination | {} |", names.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(names.len()));
        for &f in &self.config.fractions {
            let cells: Vec<String> = scored
                .iter()
                .map(|&sc| self.mean_auroc(f, sc).map_or_else(|| "n/a".into(), |a| format!("{a:.3}")))
                .collect();
            let _ = writeln!(out, "| {:.0}% OOD | {} |", f * 100.0, cells.join(" | "));
        }

        let _ = writeln!(out, "\n## DeDiM and unfiltered accuracy\n");
        let _ = writeln!(out, "| contamination | DeDiM (mean) | accuracy |");
        let _ = writeln!(out, "|---|---|---|");
        for &f in &self.config.fractions {
            let d: Vec<f64> = self.cells(f, Scorer::None).filter_map(|r| r.dedim_mean).collect();
            let d = if d.is_empty() { "n/a".into() } else { format!("{:.4}", mean_std(&d).0) };
            let _ = writeln!(out, "| {:.0}% OOD | {d} | {} |", f * 100.0, pm(self.accuracy_summary(f, Scorer::None)));
        }
        let pearson = self
            .dedim_accuracy_pearson()
            .map_or_else(|e| format!("n/a ({e})"), |r| format!("{r:.3}"));
        let _ = writeln!(out, "\nPearson coefficient (DeDiM vs accuracy): {pearson}");

        let _ = writeln!(out, "\n## Wilcoxon signed-rank tests (paired by seed)\n");
        let _ = writeln!(out, "| contamination | a | b | mean(a − b) | p |");
        let _ = writeln!(out, "|---|---|---|---|---|");
        for w in self.wilcoxon_table() {
            let p = w.p_value.map_or_else(|| "n/a".into(), |p| format!("{p:.4}"));
            let _ = writeln!(
                out,
                "| {:.0}% OOD | {} | {} | {:+.3} | {p} |",
                w.fraction * 100.0,
                w.a.name(),
                w.b.name(),
                w.mean_difference
            );
        }

        let failures: Vec<&BenchRecord> = self.records.iter().filter(|r| r.error.is_some()).collect();
        if !failures.is_empty() {
            let _ = writeln!(out, "\n## Failed cells\n");
            for r in failures {
                let _ = writeln!(
                    out,
                    "- {:.0}% OOD, {}, seed {}: {}",
                    r.fraction * 100.0,
                    r.scorer.name(),
                    r.seed,
                    r.error.as_deref().unwrap_or("")
                );
            }
        }
        out
    }

    /// Write `records.csv`, `summary.csv` and `report.md` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("records.csv", self.records_csv()),
            ("summary.csv", self.summary_csv()),
            ("report.md", self.report_md()),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Models fitted once per seed on the standardized labelled set.
struct SeedModels {
    density: Result<DensityModel>,
    gaussian: Result<GaussianModel>,
    head: Result<MlpNet>,
}

fn scores_for(scorer: Scorer, models: &SeedModels, table: &FeatureTable, passes: usize, seed: u64) -> Result<Vec<f64>> {
    let err = |e: &Error| Error::Degenerate(format!("scorer unavailable: {e}"));
    match scorer {
        Scorer::None => Ok(vec![0.0; table.n()]),
        Scorer::Fh => models.density.as_ref().map_err(err)?.score_table(table),
        Scorer::Mahalanobis => models.gaussian.as_ref().map_err(err)?.score_table(table),
        Scorer::Softmax => score_table_softmax(models.head.as_ref().map_err(err)?, table),
        Scorer::Mcd => BaselineScorer::new(models.head.as_ref().map_err(err)?.clone(), BaselineMethod::Mcd, passes)?
            .score_table(table, seed),
    }
}

struct SeedOutcome {
    records: Vec<BenchRecord>,
    supervised: Option<Result<f64, String>>,
}

fn run_seed(config: &BenchConfig, seed: u64) -> SeedOutcome {
    let blank = |fraction, scorer, e: &Error| BenchRecord {
        fraction,
        scorer,
        seed,
        accuracy: None,
        dedim_mean: None,
        dedim_std: None,
        auroc: None,
        kept: 0,
        error: Some(e.to_string()),
    };
    let prepared = (|| -> Result<_> {
        let data = gen_synthetic(&config.synthetic, seed)?;
        let stats = StandardizationStats::fit(&data.labelled)?;
        let labelled = stats.apply(&data.labelled)?;
        let test = stats.apply(&data.test)?;
        Ok((data, stats, labelled, test))
    })();
    let (data, stats, labelled, test) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let records = config
                .fractions
                .iter()
                .flat_map(|&f| config.scorers.iter().map(move |&s| (f, s)))
                .map(|(f, s)| blank(f, s, &e))
                .collect();
            return SeedOutcome {
                records,
                supervised: config.supervised.then(|| Err(e.to_string())),
            };
        }
    };

    let mut mm = config.mixmatch.clone();
    mm.train.seed = seed;
    let supervised = config.supervised.then(|| {
        let mut sup = mm.clone();
        sup.gamma = 0.0;
        FeatureTable::empty(labelled.dim(), false)
            .and_then(|empty| train_mixmatch(&labelled, &empty, &test, &sup))
            .and_then(|(_, h)| h.final_accuracy().ok_or(Error::EmptyDataset))
            .map_err(|e| e.to_string())
    });

    let needs = |s: Scorer| config.scorers.contains(&s);
    let mut baseline = config.baseline.clone();
    baseline.seed = seed;
    fn unavailable<T>() -> Result<T> {
        Err(Error::Degenerate("not requested".into()))
    }
    let models = SeedModels {
        density: if needs(Scorer::Fh) { DensityModel::fit(&labelled, config.bins) } else { unavailable() },
        gaussian: if needs(Scorer::Mahalanobis) {
            GaussianModel::fit(&labelled, config.shrinkage)
        } else {
            unavailable()
        },
        head: if needs(Scorer::Softmax) || needs(Scorer::Mcd) {
            train_baseline_head(&labelled, &baseline)
        } else {
            unavailable()
        },
    };
    let dedim_config = DedimConfig {
        batch_size: config.dedim_batch,
        batches: config.dedim_batches,
        bins: config.dedim_bins,
        seed,
    };

    let mut records = Vec::new();
    for &fraction in &config.fractions {
        let mixed = contaminate(&data.in_dist_pool, &data.ood_pool, fraction, config.synthetic.n_unlabelled, seed)
            .and_then(|m| Ok((stats.apply(&m.table)?, m.ood)));
        let (unlabelled, ood) = match mixed {
            Ok(m) => m,
            Err(e) => {
                records.extend(config.scorers.iter().map(|&s| blank(fraction, s, &e)));
                continue;
            }
        };
        let dedim = dedim_cosine(&labelled, &unlabelled, &dedim_config).ok();
        for &scorer in &config.scorers {
            let mut record = BenchRecord {
                fraction,
                scorer,
                seed,
                accuracy: None,
                dedim_mean: dedim.as_ref().map(|d| d.mean),
                dedim_std: dedim.as_ref().map(|d| d.std),
                auroc: None,
                kept: 0,
                error: None,
            };
            let outcome = (|| -> Result<()> {
                let kept = if scorer == Scorer::None {
                    unlabelled.clone()
                } else {
                    let scores = scores_for(scorer, &models, &unlabelled, config.mcd_passes, seed)?;
                    record.auroc = auroc(&scores, &ood).ok();
                    let pairs: Vec<(String, f64)> = unlabelled.ids().iter().cloned().zip(scores).collect();
                    apply_filter(&unlabelled, &rank_and_filter(&pairs, fraction)?)?
                };
                record.kept = kept.n();
                let (_, history) = train_mixmatch(&labelled, &kept, &test, &mm)?;
                record.accuracy = history.final_accuracy();
                Ok(())
            })();
            if let Err(e) = outcome {
                record.error = Some(e.to_string());
            }
            records.push(record);
        }
    }
    SeedOutcome { records, supervised }
}

/// Run every (fraction, scorer, seed) cell. Cell failures are recorded in
/// the report; only an invalid configuration is an error.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let threads = match config.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(config.seeds.len());

    let mut outcomes: Vec<Option<SeedOutcome>> = (0..config.seeds.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(&mut outcomes);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= config.seeds.len() {
                    break;
                }
                let outcome = run_seed(config, config.seeds[i]);
                results.lock().expect("no worker panicked")[i] = Some(outcome);
            });
        }
    });

    let mut per_seed: Vec<SeedOutcome> = outcomes.into_iter().map(|o| o.expect("every seed ran")).collect();
    let mut records = Vec::with_capacity(config.fractions.len() * config.scorers.len() * config.seeds.len());
    for fi in 0..config.fractions.len() {
        for si in 0..config.scorers.len() {
            for outcome in &per_seed {
                records.push(outcome.records[fi * config.scorers.len() + si].clone());
            }
        }
    }
    let supervised = config
        .seeds
        .iter()
        .zip(per_seed.iter_mut())
        .filter_map(|(&seed, o)| o.supervised.take().map(|r| (seed, r)))
        .collect();
    Ok(BenchReport {
        config: config.clone(),
        records,
        supervised,
    })
}
