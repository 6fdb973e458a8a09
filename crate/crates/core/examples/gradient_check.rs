//! Compares backpropagated gradients with central finite differences for
//! every sweep case, on a random subset of parameters.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use fvmn::neural::{param_count, Network, NetworkSpec, SWEEP_CASES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
/// Components below this magnitude are compared absolutely.
const SCALE_FLOOR: f64 = 1e-3;
const PROBES: usize = 64;

fn main() -> fvmn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (k, &case) in SWEEP_CASES.iter().enumerate() {
        let spec = NetworkSpec::sweep_case(case, 30)?;
        let mut net = Network::init(&spec, k as u64)?;
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = rng.random_range(-1.0..1.0);
        let (_, grads) = net.sample_gradients(&x, target)?;
        let analytic = grads.flat();

        let base = net.params();
        let loss = |net: &Network| -> fvmn::Result<f64> { Ok((net.predict(&x)? - target).powi(2)) };
        let mut worst: f64 = 0.0;
        for _ in 0..PROBES {
            let p = rng.random_range(0..base.len());
            let mut moved = base.clone();
            moved[p] = base[p] + STEP;
            net.set_params(&moved)?;
            let up = loss(&net)?;
            moved[p] = base[p] - STEP;
            net.set_params(&moved)?;
            let down = loss(&net)?;
            let numeric = (up - down) / (2.0 * STEP);
            let scale = analytic[p].abs().max(numeric.abs()).max(SCALE_FLOOR);
            worst = worst.max((analytic[p] - numeric).abs() / scale);
        }
        net.set_params(&base)?;
        println!("case {case}: {:<28} {:>7} parameters, worst relative gradient error {worst:.2e}", spec.to_string(), param_count(&spec));
    }
    Ok(())
}
