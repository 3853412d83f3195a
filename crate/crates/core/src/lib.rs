//! Photon-number statistics of q-deformed probe states and the local
//! estimation bounds for the deformation strength `epsilon`.
//!
//! * [`algebra`]: q-numbers, deformed factorials and energy coefficients.
//! * [`states`]: certified-truncation distributions for coherent, thermal and cat probes.
//! * [`estimation`]: Fisher information, quantum Fisher information, QSNR.
//! * [`montecarlo`]: photon-counting simulation and maximum-likelihood benchmarks.

#![forbid(unsafe_code)]

pub mod algebra;
pub mod error;
pub mod estimation;
pub mod montecarlo;
mod serde_util;
pub mod states;

pub use algebra::{DeformationKind, DeformationParams};
pub use error::{Error, Result};
pub use estimation::{DerivativeConfig, DerivativeMethod, EstimationReport, QsnrRow};
pub use montecarlo::{CountSample, CrbBenchmark, MleResult};
pub use states::{AmplitudeVector, PhotonDistribution, ProbeClass, ProbeSpec, Regime};
