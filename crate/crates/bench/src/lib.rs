//! Shared fixtures for the criterion benches.

use stockgan_core::discriminator::{DiscriminatorConfig, DiscriminatorParams};
use stockgan_core::generator::{GeneratorConfig, GeneratorParams};
use stockgan_core::numerics::Rng;

/// Default-sized generator (window 121, hidden 25).
pub fn generator(window: usize, hidden: usize, seed: u64) -> GeneratorParams {
    let cfg = GeneratorConfig {
        window,
        hidden_size: hidden,
        ..GeneratorConfig::default()
    };
    GeneratorParams::init(cfg, &mut Rng::new(seed)).expect("valid generator config")
}

pub fn discriminator(input_len: usize, seed: u64) -> DiscriminatorParams {
    DiscriminatorParams::init(DiscriminatorConfig::fitted(input_len), &mut Rng::new(seed))
        .expect("fitted config is valid")
}

pub fn wave(len: usize) -> Vec<f64> {
    (0..len).map(|t| 0.5 + 0.4 * (t as f64 * 0.13).sin()).collect()
}
