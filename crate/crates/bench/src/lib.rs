//! Shared inputs for the benchmarks in `benches/`.

use relu_compress::network::{sample_target, CoeffLaw, SamplerConfig, WeightLaw};
use relu_compress::{rng, TargetNetwork, UnitVector};

pub fn target(n: usize, d: usize, seed: u64) -> TargetNetwork {
    let cfg = SamplerConfig::new(n, d, WeightLaw::UniformSphere, CoeffLaw::Uniform { lo: 0.5, hi: 1.5 }, seed);
    sample_target(&cfg).expect("valid sampler configuration")
}

pub fn sphere_points(m: usize, d: usize, seed: u64) -> Vec<UnitVector> {
    let mut r = rng::seeded(seed);
    (0..m).map(|_| UnitVector::random(d, &mut r)).collect()
}

pub fn alphas(count: usize) -> Vec<f64> {
    (0..count).map(|k| -1.0 + 2.0 * k as f64 / (count - 1) as f64).collect()
}
