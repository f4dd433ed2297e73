//! Benchmark fixtures for `benches/pipeline.rs`.

use kronruin_core::{preset_r_of_d, BirthDeathSpec, GameSpec};

/// `d` copies of a lazy constant-rate walk on `{1, .., n}`, mixed with the
/// r-of-d preset. Lazy enough for the pure-birth dual to exist.
pub fn lazy_walk_game(d: usize, n: usize, r: usize) -> GameSpec {
    let rate = 0.04 / d as f64;
    let walk = BirthDeathSpec::constant(n, rate, rate / 2.0).expect("valid rates");
    preset_r_of_d(vec![walk; d], r).expect("valid preset")
}
