//! Fixtures, reference implementations and property checks shared by the
//! integration test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng as _;
use ssdl_harm::curation::{drop_count, rank_and_filter};
use ssdl_harm::dedim::{dedim_cosine, DedimConfig};
use ssdl_harm::density::{Histogram, PROB_FLOOR};
use ssdl_harm::gaussian::shrink_covariance;
use ssdl_harm::mixmatch::{augment, guess_label, mixup_with_lambda, sharpen};
use ssdl_harm::nn::{argmax, Loss, MlpNet};
use ssdl_harm::rng::{seeded, Rng};
use ssdl_harm::{FeatureTable, StandardizationStats};

pub type Check = Result<(), TestCaseError>;

// ---------- fixtures ----------

pub fn random_table(n: usize, d: usize, seed: u64) -> FeatureTable {
    let mut rng = seeded(seed);
    let rows = (0..n)
        .map(|_| (0..d).map(|j| rng.random_range(-2.0..2.0) * (1.0 + j as f64)).collect())
        .collect();
    FeatureTable::new((0..n).map(|i| format!("r{i}")).collect(), rows, None).unwrap()
}

pub fn table_strategy(n: std::ops::Range<usize>, d: std::ops::Range<usize>) -> impl Strategy<Value = FeatureTable> {
    (n, d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-50.0f64..50.0, n * d).prop_map(move |values| {
            FeatureTable::from_flat((0..n).map(|i| format!("r{i}")).collect(), values, d, None).unwrap()
        })
    })
}

pub fn probability_vector(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let total: f64 = v.iter().sum();
        v.into_iter().map(|x| x / total).collect()
    })
}

pub fn scored(scores: &[f64]) -> Vec<(String, f64)> {
    scores.iter().enumerate().map(|(i, s)| (format!("u{i}"), *s)).collect()
}

// ---------- reference implementations ----------

/// Squared Mahalanobis distance through an explicit LU inverse of the shrunk
/// sample covariance.
pub fn brute_mahalanobis(table: &FeatureTable, shrinkage: f64, h: &[f64]) -> f64 {
    let (n, d) = (table.n(), table.dim());
    let mean: Vec<f64> = (0..d).map(|j| table.column(j).sum::<f64>() / n as f64).collect();
    let mut cov = DMatrix::zeros(d, d);
    for r in table.rows() {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]) / (n as f64 - 1.0);
            }
        }
    }
    let inv = shrink_covariance(&cov, shrinkage).try_inverse().unwrap();
    let diff = DVector::from_iterator(d, h.iter().zip(&mean).map(|(x, m)| x - m));
    (diff.transpose() * inv * diff)[(0, 0)]
}

/// Count-and-log negative log-likelihood over per-dimension equal-width bins.
pub fn brute_fh(table: &FeatureTable, bins: usize, h: &[f64]) -> f64 {
    let n = table.n() as f64;
    let mut total = 0.0;
    for (j, &v) in h.iter().enumerate() {
        let col: Vec<f64> = table.column(j).collect();
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let bin = |x: f64| -> Option<usize> {
            if x < lo || x > hi {
                None
            } else {
                Some((((x - lo) / width).floor() as usize).min(bins - 1))
            }
        };
        let p = match bin(v) {
            None => PROB_FLOOR,
            Some(k) => {
                let count = col.iter().filter(|&&x| bin(x) == Some(k)).count();
                (count as f64 / n).max(PROB_FLOOR)
            }
        };
        total -= p.ln();
    }
    total
}

/// AUROC as the fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn brute_auroc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

// ---------- gradient fixtures ----------

/// He-initialized network with random biases, so no pre-activation sits
/// exactly on the rectifier kink where finite differences see half a slope.
pub fn random_net(sizes: &[usize], rng: &mut Rng) -> MlpNet {
    let mut net = MlpNet::new(sizes, 0.2, rng).unwrap();
    for layer in net.layers_mut() {
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    net
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.5..1.5))
}

pub fn random_targets(rows: usize, classes: usize, rng: &mut Rng) -> DMatrix<f64> {
    let mut t = DMatrix::from_fn(rows, classes, |_, _| rng.random_range(0.05..1.0));
    for mut row in t.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    t
}

/// Dropout masks for every hidden layer, scaled like training-time dropout.
pub fn fixed_masks(net: &MlpNet, rows: usize, rng: &mut Rng) -> Vec<DMatrix<f64>> {
    let keep = 1.0 - net.dropout();
    net.layers()[..net.layers().len() - 1]
        .iter()
        .map(|l| DMatrix::from_fn(rows, l.outputs(), |_, _| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }))
        .collect()
}

/// The MixMatch objective on a batch assembled exactly as in training, with
/// the augmentation noise, MixUp partners and λ drawn once and then frozen.
pub fn mixmatch_fixture(net: &MlpNet, seed: u64) -> (DMatrix<f64>, DMatrix<f64>, Loss) {
    let mut rng = seeded(seed);
    let (d, classes) = (net.input_dim(), net.output_dim());
    let (n_l, n_u, k) = (3, 2, 2);
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<Vec<f64>> = Vec::new();
    for i in 0..n_l {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        xs.push(augment(&x, 0.1, &mut rng));
        let mut y = vec![0.0; classes];
        y[i % classes] = 1.0;
        ys.push(y);
    }
    for _ in 0..n_u {
        let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let guess = sharpen(&guess_label(net, &u, k, 0.1, &mut rng).unwrap(), 0.25).unwrap();
        for _ in 0..k {
            xs.push(augment(&u, 0.1, &mut rng));
            ys.push(guess.clone());
        }
    }
    let rows = xs.len();
    let mut batch = Vec::new();
    let mut targets = Vec::new();
    for i in 0..rows {
        let partner = (i * 3 + 1) % rows;
        let lambda = rng.random_range(0.0..1.0);
        let (x, y) = mixup_with_lambda(&xs[i], &ys[i], &xs[partner], &ys[partner], lambda);
        batch.extend(x);
        targets.extend(y);
    }
    (
        DMatrix::from_row_slice(rows, d, &batch),
        DMatrix::from_row_slice(rows, classes, &targets),
        Loss::MixMatch {
            labelled_rows: n_l,
            gamma: 200.0,
        },
    )
}

/// The `seed`-th small gradient fixture: net, batch, targets, loss and masks.
/// Seeds cycle through cross-entropy, squared error and the MixMatch loss.
pub fn gradient_fixture(seed: u64) -> (MlpNet, DMatrix<f64>, DMatrix<f64>, Loss, Vec<DMatrix<f64>>) {
    let mut rng = seeded(1000 + seed);
    let d = 2 + (seed % 3) as usize;
    let classes = 2 + (seed % 2) as usize;
    let hidden = 3 + (seed % 4) as usize;
    let sizes = if seed % 2 == 0 { vec![d, hidden, classes] } else { vec![d, hidden, hidden, classes] };
    let net = random_net(&sizes, &mut rng);
    let (batch, targets, loss) = match seed % 5 {
        0 | 1 => (random_matrix(5, d, &mut rng), random_targets(5, classes, &mut rng), Loss::CrossEntropy),
        2 => (random_matrix(4, d, &mut rng), random_matrix(4, classes, &mut rng), Loss::SquaredError),
        _ => mixmatch_fixture(&net, seed),
    };
    let masks = fixed_masks(&net, batch.nrows(), &mut rng);
    (net, batch, targets, loss, masks)
}

// ---------- property checks ----------

pub fn histogram_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (prop::collection::vec(-10.0f64..10.0, 2..60), 1usize..20)
}

/// Bin probabilities sum to one before flooring and never fall below the floor after.
pub fn check_histogram_normalization((values, bins): (Vec<f64>, usize)) -> Check {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw = Histogram::fit(&values, lo, hi, bins, 0.0);
    prop_assert!((raw.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    prop_assert!(raw.edges().windows(2).all(|w| w[0] < w[1]));
    let floored = Histogram::fit(&values, lo, hi, bins, PROB_FLOOR);
    prop_assert!(floored.probs().iter().all(|&p| p >= PROB_FLOOR));
    Ok(())
}

pub fn sharpen_strategy() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (probability_vector(2..8), 0.05f64..1.0)
}

pub fn check_sharpen((p, t): (Vec<f64>, f64)) -> Check {
    let q = sharpen(&p, t).unwrap();
    prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    prop_assert!(q.iter().all(|&v| (0.0..=1.0).contains(&v)));
    prop_assert_eq!(argmax(q.iter().copied()), argmax(p.iter().copied()));
    let max_p = p.iter().copied().fold(0.0, f64::max);
    prop_assert!(q.iter().copied().fold(0.0, f64::max) >= max_p - 1e-12);
    Ok(())
}

pub type MixupCase = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64);

pub fn mixup_strategy() -> impl Strategy<Value = MixupCase> {
    (
        prop::collection::vec(-10.0f64..10.0, 4),
        prop::collection::vec(-10.0f64..10.0, 4),
        probability_vector(3..4),
        probability_vector(3..4),
        0.0f64..=1.0,
    )
}

/// The mix is `λ′·first + (1 − λ′)·second` with `λ′ ≥ 0.5`.
pub fn check_mixup((x1, x2, y1, y2, lambda): MixupCase) -> Check {
    let (x, y) = mixup_with_lambda(&x1, &y1, &x2, &y2, lambda);
    let l = lambda.max(1.0 - lambda);
    prop_assert!(l >= 0.5);
    for ((v, a), b) in x.iter().zip(&x1).zip(&x2) {
        prop_assert!((v - (l * a + (1.0 - l) * b)).abs() < 1e-12);
        prop_assert!((v - a).abs() <= (v - b).abs() + 1e-12);
    }
    prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    Ok(())
}

pub fn filter_strategy() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (
        prop::collection::vec((-3i32..3).prop_map(f64::from), 0..60),
        0.0f64..=1.0,
        0.0f64..=1.0,
    )
}

/// Cardinality, monotonicity in the fraction and invariance under an
/// increasing transform of the scores.
pub fn check_filter((scores, f1, f2): (Vec<f64>, f64, f64)) -> Check {
    let s = scored(&scores);
    let (lo, hi) = (f1.min(f2), f1.max(f2));
    let small = rank_and_filter(&s, lo).unwrap();
    let large = rank_and_filter(&s, hi).unwrap();
    prop_assert_eq!(small.kept.len() + small.dropped.len(), scores.len());
    prop_assert_eq!(small.dropped.len(), drop_count(lo, scores.len()));
    let harm = |id: &String| s.iter().find(|p| &p.0 == id).unwrap().1;
    let max_kept = small.kept.iter().map(harm).fold(f64::NEG_INFINITY, f64::max);
    prop_assert!(small.dropped.iter().all(|id| harm(id) >= max_kept));
    prop_assert!(small.dropped.iter().all(|id| large.dropped.contains(id)));
    let transformed: Vec<(String, f64)> = s.iter().map(|(id, v)| (id.clone(), (v * 0.7).exp() + 3.0)).collect();
    prop_assert_eq!(rank_and_filter(&transformed, lo).unwrap(), small);
    Ok(())
}

pub fn standardization_strategy() -> impl Strategy<Value = FeatureTable> {
    table_strategy(3..30, 1..6)
}

/// Standardized columns have mean 0 and unit variance, and standardizing again changes nothing.
pub fn check_standardization(table: FeatureTable) -> Check {
    let stats = StandardizationStats::fit(&table).unwrap();
    let z = stats.apply(&table).unwrap();
    let n = z.n() as f64;
    for j in 0..z.dim() {
        let col: Vec<f64> = z.column(j).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!(mean.abs() < 1e-10);
        prop_assert!((var - 1.0).abs() < 1e-8);
    }
    let again = StandardizationStats::fit(&z).unwrap().apply(&z).unwrap();
    for (a, b) in z.features().iter().zip(again.features()) {
        prop_assert!((a - b).abs() < 1e-9);
    }
    Ok(())
}

pub fn dedim_strategy() -> impl Strategy<Value = (FeatureTable, u64)> {
    (table_strategy(12..30, 1..5), 0u64..1000)
}

/// Paired-seed symmetry, per-round range `[0, 1]`, determinism and zero self-distance.
pub fn check_dedim((a, seed): (FeatureTable, u64)) -> Check {
    let b = a.with_features(a.features().iter().map(|v| v * 0.5 + 3.0).collect()).unwrap();
    let config = DedimConfig {
        batch_size: 10,
        batches: 4,
        seed,
        ..DedimConfig::default()
    };
    let ab = dedim_cosine(&a, &b, &config).unwrap();
    let ba = dedim_cosine(&b, &a, &config).unwrap();
    prop_assert_eq!(&ab.per_round, &ba.per_round);
    prop_assert!(ab.per_round.iter().all(|d| (0.0..=1.0).contains(d)));
    prop_assert_eq!(&ab, &dedim_cosine(&a, &b, &config).unwrap());
    prop_assert!(dedim_cosine(&a, &a, &config).unwrap().mean.abs() < 1e-12);
    Ok(())
}
