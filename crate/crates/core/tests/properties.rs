//! Property-based checks of the module invariants.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ssdl_harm::baselines::{harm_mcd, harm_softmax};
use ssdl_harm::dedim::{dedim_cosine, DedimConfig};
use ssdl_harm::density::{DensityModel, Histogram};
use ssdl_harm::gaussian::GaussianModel;
use ssdl_harm::mixmatch::mixmatch_loss;
use ssdl_harm::nn::{one_cycle_lr, softmax, Dense, MlpNet};
use ssdl_harm::rng::seeded;
use ssdl_harm::table::average_pool_features;
use ssdl_harm::FeatureTable;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn histogram_probabilities_normalize(case in histogram_strategy()) {
        check_histogram_normalization(case)?;
    }

    #[test]
    fn standardization_is_idempotent(table in standardization_strategy()) {
        check_standardization(table)?;
    }

    #[test]
    fn sharpen_keeps_simplex_and_argmax(case in sharpen_strategy()) {
        check_sharpen(case)?;
    }

    #[test]
    fn mixup_is_convex_toward_first(case in mixup_strategy()) {
        check_mixup(case)?;
    }

    #[test]
    fn filter_cardinality_monotonicity_and_rank_invariance(case in filter_strategy()) {
        check_filter(case)?;
    }

    #[test]
    fn dedim_symmetric_bounded_and_deterministic(case in dedim_strategy()) {
        check_dedim(case)?;
    }

    #[test]
    fn density_model_invariants(table in table_strategy(3..30, 1..5), bins in 1usize..17) {
        let model = DensityModel::fit(&table, bins).unwrap();
        for h in model.histograms() {
            prop_assert!(h.edges().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(h.probs().iter().all(|&p| p >= model.floor() && p <= 1.0));
        }
        for s in model.score_table(&table).unwrap() {
            prop_assert!(s.is_finite() && s >= 0.0);
        }
    }

    #[test]
    fn fh_harm_increases_when_a_bin_probability_drops(
        table in table_strategy(4..20, 1..4),
        which in any::<prop::sample::Index>(),
    ) {
        let model = DensityModel::fit(&table, 4).unwrap();
        let query = table.row(which.index(table.n())).to_vec();
        let before = model.harm(&query).unwrap();
        let mut dims = model.histograms().to_vec();
        let j = which.index(dims.len());
        let v = query[j];
        let k = dims[j].edges().windows(2).position(|w| v >= w[0] && v <= w[1]).unwrap();
        let mut probs = dims[j].probs().to_vec();
        probs[k] *= 0.5;
        dims[j] = Histogram::from_parts(dims[j].edges().to_vec(), probs).unwrap();
        let lowered = DensityModel::from_parts(dims, model.floor()).unwrap();
        prop_assert!(lowered.harm(&query).unwrap() > before);
    }

    #[test]
    fn fh_invariant_to_dimension_permutation(table in table_strategy(4..20, 2..5), rot in 1usize..4) {
        let d = table.dim();
        let perm: Vec<usize> = (0..d).map(|j| (j + rot) % d).collect();
        let permuted = table.with_features(
            table.rows().flat_map(|r| perm.iter().map(|&j| r[j]).collect::<Vec<_>>()).collect(),
        ).unwrap();
        let a = DensityModel::fit(&table, 8).unwrap().score_table(&table).unwrap();
        let b = DensityModel::fit(&permuted, 8).unwrap().score_table(&permuted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn mahalanobis_nonnegative_and_zero_at_mean(table in table_strategy(3..25, 1..6)) {
        let model = GaussianModel::fit(&table, 0.1);
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        for s in model.score_table(&table).unwrap() {
            prop_assert!(s >= 0.0);
        }
        prop_assert!(model.harm(&model.mean().to_vec()).unwrap().abs() < 1e-9);
    }

    #[test]
    fn mahalanobis_affine_invariance(
        table in table_strategy(8..20, 1..4),
        entries in prop::collection::vec(-2.0f64..2.0, 9),
        offset in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let d = table.dim();
        let a = DMatrix::from_fn(d, d, |i, j| entries[i * 3 + j] + if i == j { 3.0 } else { 0.0 });
        prop_assume!(a.determinant().abs() > 0.5);
        let map = |r: &[f64]| -> Vec<f64> {
            let y = &a * DVector::from_column_slice(r);
            y.iter().zip(&offset).map(|(v, o)| v + o).collect()
        };
        let mapped = table.with_features(table.rows().flat_map(map).collect()).unwrap();
        let (m1, m2) = (GaussianModel::fit(&table, 0.0), GaussianModel::fit(&mapped, 0.0));
        prop_assume!(m1.is_ok() && m2.is_ok());
        let (m1, m2) = (m1.unwrap(), m2.unwrap());
        let query = [1.0, -2.0, 0.5];
        let s1 = m1.harm(&query[..d]).unwrap();
        let s2 = m2.harm(&map(&query[..d])).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-6 * s1.abs().max(1.0), "{} vs {}", s1, s2);
    }

    #[test]
    fn csv_round_trip(table in table_strategy(1..20, 1..6), labelled in any::<bool>()) {
        let table = if labelled {
            FeatureTable::from_flat(
                table.ids().to_vec(), table.features().to_vec(), table.dim(), Some((0..table.n()).map(|i| i % 3).collect()),
            ).unwrap()
        } else {
            table
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = FeatureTable::read_csv(buf.as_slice(), "mem", labelled).unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn pooling_preserves_mean(values in prop::collection::vec(-100.0f64..100.0, 1..8), blocks in 1usize..6) {
        let vector: Vec<f64> = values.iter().cycle().take(values.len() * blocks).copied().collect();
        let pooled = average_pool_features(&vector, values.len()).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&pooled) - mean(&vector)).abs() < 1e-9);
    }

    #[test]
    fn mixmatch_loss_nonnegative_and_monotone_in_gamma(
        logits in prop::collection::vec(-5.0f64..5.0, 6),
        targets in probability_vector(2..3),
        probs in probability_vector(2..3),
        pseudo in probability_vector(2..3),
        g1 in 0.0f64..300.0,
        g2 in 0.0f64..300.0,
    ) {
        let logits = DMatrix::from_row_slice(3, 2, &logits);
        let targets = DMatrix::from_fn(3, 2, |_, j| targets[j]);
        let probs = DMatrix::from_row_slice(1, 2, &probs);
        let pseudo = DMatrix::from_row_slice(1, 2, &pseudo);
        let (lo, hi) = (g1.min(g2), g1.max(g2));
        let a = mixmatch_loss(&logits, &targets, &probs, &pseudo, lo).unwrap();
        let b = mixmatch_loss(&logits, &targets, &probs, &pseudo, hi).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-700.0f64..700.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn one_cycle_is_continuous(total in 10usize..2000, lr_max in 1e-4f64..1.0) {
        let mut prev = one_cycle_lr(0, total, lr_max, 25.0, 1e4).unwrap();
        for step in 1..total {
            let lr = one_cycle_lr(step, total, lr_max, 25.0, 1e4).unwrap();
            prop_assert!(lr > 0.0 && lr <= lr_max * (1.0 + 1e-12));
            // steepest slope of the warmup cosine is (π/2)·lr_max/(0.3·total)
            prop_assert!((lr - prev).abs() <= 6.0 * lr_max / total as f64);
            prev = lr;
        }
    }

    #[test]
    fn baseline_scores_bounded(weights in prop::collection::vec(-3.0f64..3.0, 3 * 4), x in prop::collection::vec(-2.0f64..2.0, 4)) {
        let layer = Dense { weights: DMatrix::from_row_slice(3, 4, &weights), bias: DVector::zeros(3) };
        let net = MlpNet::from_layers(vec![layer], 0.0).unwrap();
        let s = harm_softmax(&net, &x).unwrap();
        prop_assert!((0.0..=1.0 - 1.0 / 3.0 + 1e-12).contains(&s));
        prop_assert_eq!(harm_mcd(&net, &x, 20, &mut seeded(1)).unwrap(), 0.0);
    }
}

#[test]
fn dedim_grows_with_translation() {
    let mut rng = seeded(4);
    let base: Vec<f64> = (0..200 * 3).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)).collect();
    let a = FeatureTable::from_flat((0..200).map(|i| format!("a{i}")).collect(), base.clone(), 3, None).unwrap();
    let config = DedimConfig::default();
    let shifted = |by: f64| a.with_features(base.iter().map(|v| v + by).collect()).unwrap();
    let near = dedim_cosine(&a, &shifted(0.5), &config).unwrap().mean;
    let far = dedim_cosine(&a, &shifted(10.0), &config).unwrap().mean;
    assert!(far > near, "{far} <= {near}");
}

#[test]
fn uniform_outputs_reach_the_softmax_bound() {
    let layer = Dense { weights: DMatrix::zeros(4, 2), bias: DVector::zeros(4) };
    let net = MlpNet::from_layers(vec![layer], 0.0).unwrap();
    assert!((harm_softmax(&net, &[1.0, 2.0]).unwrap() - 0.75).abs() < 1e-15);
}
