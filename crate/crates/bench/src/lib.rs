//! Benchmark fixtures shared by the criterion targets.

use rmst_core::sim::ScenarioSpec;
use rmst_core::Dataset;

/// A calibrated scenario-2 dataset, fixed seed.
pub fn bench_dataset(n: usize) -> Dataset {
    let spec = ScenarioSpec {
        censor_upper: Some(10.4),
        ..ScenarioSpec::builtin("2").expect("builtin scenario")
    };
    rmst_core::generate(&spec, n, 42).expect("generation")
}
