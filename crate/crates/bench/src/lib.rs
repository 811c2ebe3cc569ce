//! Shared instance builders for the benchmark targets.

use cs_lab_core::signal::{derive_seed, MagnitudeProfile, SignalRegime};
use cs_lab_core::{MeasurementInstance, SeedRecord};

/// A seeded flat-profile instance for benchmarking decoders and projections.
pub fn bench_instance(m: usize, l: usize, n: usize, nu: f64, seed: u64) -> MeasurementInstance {
    let regime = SignalRegime::sublinear(MagnitudeProfile::Flat);
    let seeds = SeedRecord {
        matrix_seed: derive_seed(seed, "matrix", 0),
        noise_seed: derive_seed(seed, "noise", 0),
        signal_seed: derive_seed(seed, "signal", 0),
    };
    MeasurementInstance::draw(m, l, n, &regime, 1.0, nu, seeds).expect("valid bench instance")
}
