//! Photon-number distributions of deformed coherent, thermal and cat probes.
//!
//! Weights are accumulated in log domain and truncated adaptively. The
//! truncation is certified by a geometric majorant: once the ratio
//! `r_n = w_{n+s}/w_n` is below one and non-increasing (true for every
//! convergent family here, because `[n]` and `γ_n` are increasing and convex),
//! the omitted mass past index `K` is at most `w_K r_K / (1 - r_K)`.

use serde::{Deserialize, Serialize};

use crate::algebra::{
    d_ln_q_number_table, ln_q_number, log_delta_table, DeformationKind, DeformationParams,
};
use crate::error::{Error, Result};

/// Default truncation tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Hard cap on the Fock-space truncation.
pub const MAX_FOCK_CUTOFF: usize = 1_000_000;

/// Probe state family and its intensity parameter.
///
/// `alpha_sq` is `|α|²`; the phase of `α` never enters photon-number
/// statistics. `beta` is the inverse temperature at unit frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProbeSpec {
    Coherent { alpha_sq: f64 },
    Thermal { beta: f64 },
    Cat { alpha_sq: f64 },
}

/// Column labels of the leading-order QSNR table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeClass {
    Coherent,
    Superposition,
    Thermal,
}

impl ProbeClass {
    pub const ALL: [ProbeClass; 3] = [
        ProbeClass::Coherent,
        ProbeClass::Superposition,
        ProbeClass::Thermal,
    ];

    /// The probe of this class whose undeformed intensity parameter is
    /// `intensity` (`|α|²` for coherent and cat, `n_T` for thermal).
    pub fn probe(self, intensity: f64) -> Result<ProbeSpec> {
        match self {
            ProbeClass::Coherent => ProbeSpec::coherent(intensity),
            ProbeClass::Superposition => ProbeSpec::cat(intensity),
            ProbeClass::Thermal => ProbeSpec::thermal_from_mean(intensity),
        }
    }
}

/// Branch selector for the asymptotic mean-photon formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Small,
    Large,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-6 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "tolerance must lie in (0, 1e-6], got {tol}"
        )))
    }
}

impl ProbeSpec {
    pub fn coherent(alpha_sq: f64) -> Result<Self> {
        check_positive("alpha_sq", alpha_sq)?;
        Ok(ProbeSpec::Coherent { alpha_sq })
    }

    pub fn cat(alpha_sq: f64) -> Result<Self> {
        check_positive("alpha_sq", alpha_sq)?;
        Ok(ProbeSpec::Cat { alpha_sq })
    }

    pub fn thermal(beta: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        Ok(ProbeSpec::Thermal { beta })
    }

    /// Thermal probe with undeformed mean photon number `n_t`, i.e. `β = ln(1 + 1/n_t)`.
    pub fn thermal_from_mean(n_t: f64) -> Result<Self> {
        check_positive("n_mean", n_t)?;
        Self::thermal((1.0 / n_t).ln_1p())
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProbeSpec::Coherent { alpha_sq } | ProbeSpec::Cat { alpha_sq } => {
                check_positive("alpha_sq", alpha_sq)
            }
            ProbeSpec::Thermal { beta } => check_positive("beta", beta),
        }
    }

    pub fn class(&self) -> ProbeClass {
        match self {
            ProbeSpec::Coherent { .. } => ProbeClass::Coherent,
            ProbeSpec::Thermal { .. } => ProbeClass::Thermal,
            ProbeSpec::Cat { .. } => ProbeClass::Superposition,
        }
    }

    /// Pure probes (coherent, cat) carry a real amplitude vector.
    pub fn is_pure(&self) -> bool {
        !matches!(self, ProbeSpec::Thermal { .. })
    }

    /// Mean photon number at `epsilon = 0`: `|α|²`, `n_T`, or `|α|² tanh |α|²`.
    pub fn undeformed_mean(&self) -> f64 {
        match *self {
            ProbeSpec::Coherent { alpha_sq } => alpha_sq,
            ProbeSpec::Thermal { beta } => 1.0 / beta.exp_m1(),
            ProbeSpec::Cat { alpha_sq } => alpha_sq * alpha_sq.tanh(),
        }
    }

    /// Lattice spacing of the support (2 for cat states).
    fn stride(&self) -> usize {
        match self {
            ProbeSpec::Cat { .. } => 2,
            _ => 1,
        }
    }

    /// Unnormalized log-weights `ln w_n` for `n = 0..len`.
    ///
    /// Coherent: `n ln|α|² - ln Δ_n`; cat: the same on even `n`, `-inf` on odd;
    /// thermal: `-(β/2)(γ_{n+1} + γ_n - 1)`.
    pub fn log_weights(&self, params: &DeformationParams, len: usize) -> Vec<f64> {
        match *self {
            ProbeSpec::Coherent { alpha_sq } | ProbeSpec::Cat { alpha_sq } => {
                let ln_x = alpha_sq.ln();
                let cat = self.stride() == 2;
                log_delta_table(params, len)
                    .into_iter()
                    .enumerate()
                    .map(|(n, ld)| {
                        if cat && n % 2 == 1 {
                            f64::NEG_INFINITY
                        } else {
                            n as f64 * ln_x - ld
                        }
                    })
                    .collect()
            }
            ProbeSpec::Thermal { beta } => {
                let gamma: Vec<f64> = (0..=len as u64)
                    .map(|n| crate::algebra::gamma_coefficient(params, n))
                    .collect();
                (0..len)
                    .map(|n| -0.5 * beta * (gamma[n + 1] + gamma[n] - 1.0))
                    .collect()
            }
        }
    }

    /// `∂_ε ln w_n` for `n = 0..len`, from the analytic q-number derivatives.
    pub fn d_log_weights(&self, params: &DeformationParams, len: usize) -> Vec<f64> {
        match *self {
            ProbeSpec::Coherent { .. } | ProbeSpec::Cat { .. } => {
                let d = d_ln_q_number_table(params, len);
                let cat = self.stride() == 2;
                let mut acc = 0.0;
                d.into_iter()
                    .enumerate()
                    .map(|(n, dj)| {
                        acc -= dj;
                        if cat && n % 2 == 1 {
                            0.0
                        } else {
                            acc
                        }
                    })
                    .collect()
            }
            ProbeSpec::Thermal { beta } => {
                let d = d_ln_q_number_table(params, len + 1);
                let d_gamma: Vec<f64> = (0..=len)
                    .map(|n| {
                        if n == 0 {
                            0.0
                        } else {
                            ln_q_number(params, n as u64).exp() * d[n]
                        }
                    })
                    .collect();
                (0..len)
                    .map(|n| -0.5 * beta * (d_gamma[n + 1] + d_gamma[n]))
                    .collect()
            }
        }
    }

    /// Rejects parameter combinations whose weight series diverges.
    ///
    /// For M with `epsilon < 0`, `[n] → 1/|ε|`, so coherent weights decay only
    /// when `|α|² |ε| < 1` and thermal weights never decay.
    fn check_convergent(&self, params: &DeformationParams) -> Result<()> {
        let eps = params.epsilon();
        if params.kind() != DeformationKind::M || eps >= 0.0 {
            return Ok(());
        }
        match *self {
            ProbeSpec::Coherent { alpha_sq } | ProbeSpec::Cat { alpha_sq } => {
                if alpha_sq * -eps >= 1.0 {
                    return Err(Error::Divergence(format!(
                        "M deformation with epsilon = {eps}: weight ratio tends to |alpha|^2 |epsilon| = {} >= 1",
                        alpha_sq * -eps
                    )));
                }
                Ok(())
            }
            ProbeSpec::Thermal { .. } => Err(Error::Divergence(format!(
                "M deformation with epsilon = {eps} < 0: gamma_n is bounded and the partition function diverges"
            ))),
        }
    }
}

/// Truncated, normalized photon-number distribution.
///
/// `probs` is normalized over `0..=n_max`; `tail_bound` certifies that the
/// omitted mass of the untruncated distribution is at most that value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    pub probs: Vec<f64>,
    pub n_max: usize,
    pub tail_bound: f64,
    pub params: DeformationParams,
    pub spec: ProbeSpec,
}

/// Real Fock amplitudes `ψ_n` of a pure probe, with the truncation metadata
/// of the distribution they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeVector {
    pub amps: Vec<f64>,
    pub n_max: usize,
    pub tail_bound: f64,
    pub params: DeformationParams,
    pub spec: ProbeSpec,
}

impl PhotonDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Amplitudes `ψ_n = sqrt(p_n)` (`α ≥ 0` makes them real and nonnegative);
    /// `None` for mixed probes.
    pub fn amplitudes(&self) -> Option<AmplitudeVector> {
        if !self.spec.is_pure() {
            return None;
        }
        Some(AmplitudeVector {
            amps: self.probs.iter().map(|p| p.sqrt()).collect(),
            n_max: self.n_max,
            tail_bound: self.tail_bound,
            params: self.params,
            spec: self.spec,
        })
    }
}

/// Normalizes log-weights into probabilities, subtracting the max first.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Builds the distribution of any probe family with certified truncation.
pub fn distribution(
    spec: &ProbeSpec,
    params: &DeformationParams,
    tol: f64,
) -> Result<PhotonDistribution> {
    spec.validate()?;
    check_tol(tol)?;
    spec.check_convergent(params)?;

    let n0 = spec.undeformed_mean();
    let mut len = ((8.0 * (n0 + n0.sqrt())).ceil() as usize).max(16);
    loop {
        let lw = spec.log_weights(params, len);
        if let Some((k, tail)) = certify(&lw, spec.stride(), tol) {
            let probs = normalize_log_weights(&lw[..=k]);
            return Ok(PhotonDistribution {
                probs,
                n_max: k,
                tail_bound: tail,
                params: *params,
                spec: *spec,
            });
        }
        if len >= MAX_FOCK_CUTOFF {
            return Err(Error::Divergence(format!(
                "no certified truncation below n_max = {MAX_FOCK_CUTOFF} for {spec:?} at {params:?}"
            )));
        }
        len = (2 * len).min(MAX_FOCK_CUTOFF);
    }
}

/// Smallest lattice index `K` whose geometric tail majorant, relative to the
/// kept mass, is at most `tol`. Returns `(K, bound)`.
fn certify(lw: &[f64], stride: usize, tol: f64) -> Option<(usize, f64)> {
    let len = lw.len();
    if len <= stride {
        return None;
    }
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|x| (x - max).exp()).collect();

    // ratios on the lattice, r[k] = w[k + stride] / w[k]
    let lattice: Vec<usize> = (0..len - stride).step_by(stride).collect();
    let ratio = |k: usize| -> f64 {
        if w[k] == 0.0 {
            0.0
        } else {
            w[k + stride] / w[k]
        }
    };

    // First lattice position after which ratios are < 1 and non-increasing.
    let mut start = None;
    for (i, &k) in lattice.iter().enumerate().rev() {
        let r = ratio(k);
        if r >= 1.0 {
            break;
        }
        if let Some(&next) = lattice.get(i + 1) {
            if ratio(next) > r * (1.0 + 1e-12) {
                break;
            }
        }
        start = Some(i);
    }
    let start = start?;

    let mut kept: f64 = w[..lattice[start]].iter().sum();
    for &k in &lattice[start..] {
        kept += w[k];
        let r = ratio(k);
        let bound = w[k] * r / (1.0 - r) / kept;
        if bound <= tol {
            return Some((k, bound));
        }
    }
    None
}

/// Deformed coherent state.
pub fn coherent_distribution(
    alpha_sq: f64,
    params: &DeformationParams,
    tol: f64,
) -> Result<PhotonDistribution> {
    distribution(&ProbeSpec::coherent(alpha_sq)?, params, tol)
}

/// Deformed thermal state.
pub fn thermal_distribution(
    beta: f64,
    params: &DeformationParams,
    tol: f64,
) -> Result<PhotonDistribution> {
    distribution(&ProbeSpec::thermal(beta)?, params, tol)
}

/// Even superposition of deformed coherent states `|α⟩ + |-α⟩`.
pub fn cat_distribution(
    alpha_sq: f64,
    params: &DeformationParams,
    tol: f64,
) -> Result<PhotonDistribution> {
    distribution(&ProbeSpec::cat(alpha_sq)?, params, tol)
}

/// Probabilities on a fixed support `0..len`, normalized over that support.
pub fn fixed_support_probs(spec: &ProbeSpec, params: &DeformationParams, len: usize) -> Vec<f64> {
    normalize_log_weights(&spec.log_weights(params, len))
}

/// Recomputes `dist` to a tighter tolerance.
pub fn extend_truncation(dist: &PhotonDistribution, new_tol: f64) -> Result<PhotonDistribution> {
    if new_tol.is_nan() || new_tol >= dist.tail_bound {
        return Err(Error::Domain(format!(
            "new tolerance {new_tol} must be below the current tail bound {}",
            dist.tail_bound
        )));
    }
    distribution(&dist.spec, &dist.params, new_tol)
}

/// `N = Σ n p_n`. The truncation error is at most about `n_max · tail_bound`.
pub fn mean_photon(dist: &PhotonDistribution) -> f64 {
    dist.probs
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// Leading-order prediction of the deformed mean photon number.
///
/// Coherent probes ignore `regime`. For thermal and cat probes the formula is
/// expressed through the undeformed mean (`n_T` or `n_C = |α|² tanh |α|²`)
/// and the selected small/large branch.
pub fn mean_photon_expansion(spec: &ProbeSpec, params: &DeformationParams, regime: Regime) -> f64 {
    let eps = params.epsilon();
    let kind = params.kind();
    match *spec {
        ProbeSpec::Coherent { alpha_sq: x } => match kind {
            DeformationKind::M => x - 0.5 * eps * x * x,
            DeformationKind::P => x - 0.5 * eps * eps * x * (x + x * x / 3.0),
        },
        ProbeSpec::Thermal { .. } => {
            let nt = spec.undeformed_mean();
            match (kind, regime) {
                (DeformationKind::M, Regime::Large) => {
                    nt - eps * (2.0 * nt * nt + 1.5 * nt - 1.0 / 12.0)
                }
                (DeformationKind::M, Regime::Small) => nt + 0.5 * eps * nt * nt.ln(),
                (DeformationKind::P, Regime::Large) => {
                    nt - eps * eps * nt * (3.0 * nt * nt + 4.5 * nt + 1.5)
                }
                (DeformationKind::P, Regime::Small) => nt + 0.5 * eps * eps * nt * nt.ln(),
            }
        }
        ProbeSpec::Cat { .. } => {
            let nc = spec.undeformed_mean();
            let e = match kind {
                DeformationKind::M => eps,
                DeformationKind::P => eps * eps,
            };
            match regime {
                Regime::Large => nc - 0.5 * e * nc * nc,
                Regime::Small => nc - 0.5 * e * nc,
            }
        }
    }
}

/// Two independent evaluations of the cat normalization `W_ε(|α|²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatNormalization {
    /// `2 [1 + C_ε(-|α|²)/C_ε(|α|²)]` by alternating summation.
    pub via_alternating: f64,
    /// `4 Σ_even w_n / C_ε(|α|²)`.
    pub via_even_sum: f64,
}

pub fn cat_normalization(
    alpha_sq: f64,
    params: &DeformationParams,
    tol: f64,
) -> Result<CatNormalization> {
    let spec = ProbeSpec::coherent(alpha_sq)?;
    let support = distribution(&spec, params, tol)?;
    let lw = spec.log_weights(params, support.n_max + 1);
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut plus, mut minus, mut even) = (0.0, 0.0, 0.0);
    for (n, x) in lw.iter().enumerate() {
        let w = (x - max).exp();
        plus += w;
        if n % 2 == 0 {
            minus += w;
            even += w;
        } else {
            minus -= w;
        }
    }
    Ok(CatNormalization {
        via_alternating: 2.0 * (1.0 + minus / plus),
        via_even_sum: 4.0 * even / plus,
    })
}
