//! Backpropagation against central finite differences.

mod common;

use common::gradient_mismatch;
use fvmn::neural::{Activation, Network, NetworkSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn every_component_of_small_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (k, (hidden, act)) in [(&[5][..], Activation::Relu), (&[6, 4][..], Activation::Sigmoid), (&[7, 5, 3][..], Activation::Relu)]
        .into_iter()
        .enumerate()
    {
        let spec = NetworkSpec::new(4, hidden, act);
        let mut net = Network::init(&spec, 10 + k as u64).unwrap();
        let all: Vec<usize> = (0..net.params().len()).collect();
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let worst = gradient_mismatch(&mut net, &x, rng.random_range(-1.0..1.0), &all);
            assert!(worst < 1e-5, "{spec}: {worst:e}");
        }
    }
}

#[test]
fn gradient_layout_matches_parameter_layout() {
    let spec = NetworkSpec::new(3, &[4], Activation::Relu);
    let net = Network::init(&spec, 1).unwrap();
    let (_, grads) = net.sample_gradients(&[0.1, -0.4, 0.9], 0.3).unwrap();
    assert_eq!(grads.flat().len(), net.params().len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_sigmoid_networks_agree(seed in 0u64..1000, width in 1usize..9, depth in 1usize..4) {
        let spec = NetworkSpec::new(3, &vec![width; depth], Activation::Sigmoid);
        let mut net = Network::init(&spec, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let all: Vec<usize> = (0..net.params().len()).collect();
        let worst = gradient_mismatch(&mut net, &x, rng.random_range(-1.0..1.0), &all);
        prop_assert!(worst < 1e-5, "{worst:e}");
    }
}
