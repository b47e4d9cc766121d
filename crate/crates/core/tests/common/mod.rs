#![allow(dead_code)]

use coverlock_core::ProblemInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Feasible instance with values and costs on a half-integer grid, so every
/// subset sum is exact in floating point.
pub fn grid_instance(rng: &mut ChaCha8Rng, n: usize) -> ProblemInstance {
    loop {
        let values: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-6..=20) as f64 * 0.5)
            .collect();
        let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=10) as f64 * 0.5).collect();
        let total: f64 = costs.iter().sum();
        let budget = (rng.gen_range(0.15..0.8) * total * 2.0).round().max(1.0) * 0.5;
        let floor = rng.gen_range(0..=n / 2);
        let inst = ProblemInstance::new(values, costs, budget, floor).unwrap();
        if inst.is_feasible() {
            return inst;
        }
    }
}
