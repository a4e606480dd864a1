//! Fixtures shared by the criterion benches.

use frtpp_core::{derive_stream, generate, ObservedDataset, Predictiveness, ScenarioConfig};

/// A desk-scale dataset (N = 500) under the alternative.
pub fn dataset(predictiveness: Predictiveness, eta_c0: f64) -> ObservedDataset {
    let cfg = ScenarioConfig { predictiveness, eta_c0, tau: 0.5, ..ScenarioConfig::default() };
    generate(&cfg, &mut derive_stream(7, "bench")).expect("default scenario is valid").0
}
