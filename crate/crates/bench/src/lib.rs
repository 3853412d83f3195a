//! Fixtures shared by the criterion benchmarks.

use qdeform::{DeformationKind, DeformationParams, ProbeClass, ProbeSpec};

/// Probe of each class at the given intensity.
pub fn probes(intensity: f64) -> Vec<(ProbeClass, ProbeSpec)> {
    ProbeClass::ALL
        .iter()
        .map(|&c| (c, c.probe(intensity).expect("positive intensity")))
        .collect()
}

pub fn params(kind: DeformationKind, epsilon: f64) -> DeformationParams {
    DeformationParams::new(kind, epsilon).expect("epsilon > -1")
}
