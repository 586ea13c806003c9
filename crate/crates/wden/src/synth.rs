//! Seeded synthetic signals for training demos and checks when no
//! recordings are supplied.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};

/// A voiced-speech stand-in: three harmonics under a 3 Hz envelope plus a
/// faint white floor so that no spectral bin is silent.
pub fn voiced(len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sr = f64::from(sample_rate);
    (0..len)
        .map(|i| {
            let s = i as f64 / sr;
            let env = 0.5 + 0.5 * (2.0 * PI * 3.0 * s).sin();
            let tone = 0.3 * (2.0 * PI * 220.0 * s).sin()
                + 0.15 * (2.0 * PI * 440.0 * s).sin()
                + 0.07 * (2.0 * PI * 1330.0 * s).sin();
            env * tone + rng.random_range(-0.01..0.01)
        })
        .collect()
}

/// Uniform white noise of the given peak amplitude.
pub fn white(len: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| rng.random_range(-amplitude..amplitude))
        .collect()
}
