//! Backpropagation against central finite differences.

mod common;

use common::{fixed_masks, gradient_fixture, mixmatch_fixture, random_net};
use ssdl_harm::nn::grad_check;
use ssdl_harm::rng::seeded;

const TOLERANCE: f64 = 1e-4;
const EPSILON: f64 = 1e-6;

#[test]
fn ten_random_fixtures() {
    let start = std::time::Instant::now();
    for seed in 0..10u64 {
        let (net, batch, targets, loss, masks) = gradient_fixture(seed);
        let with_dropout = grad_check(&net, &batch, &targets, loss, EPSILON, Some(&masks)).unwrap();
        let without = grad_check(&net, &batch, &targets, loss, EPSILON, None).unwrap();
        assert!(with_dropout < TOLERANCE, "seed {seed} ({loss:?}) with dropout: {with_dropout}");
        assert!(without < TOLERANCE, "seed {seed} ({loss:?}): {without}");
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn mixmatch_fixture_at_training_width() {
    let mut rng = seeded(77);
    let net = random_net(&[6, 16, 16, 2], &mut rng);
    let (batch, targets, loss) = mixmatch_fixture(&net, 5);
    let masks = fixed_masks(&net, batch.nrows(), &mut rng);
    let err = grad_check(&net, &batch, &targets, loss, EPSILON, Some(&masks)).unwrap();
    assert!(err < TOLERANCE, "{err}");
}
