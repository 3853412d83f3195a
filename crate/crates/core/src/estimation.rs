//! Fisher information of photon counting, quantum Fisher information and the
//! quantum signal-to-noise ratio for the deformation strength `epsilon`.
//!
//! Fock states do not depend on `epsilon`, so for every family here the
//! photon-counting Fisher information `F = Σ (∂p_n)²/p_n` already equals the
//! QFI. For pure probes it is also computed from the amplitudes as
//! `H = 4 Σ (∂ψ_n)²`; for Fock-diagonal (thermal) probes the diagonal
//! reduction of the SLD formula gives the same summand as `F`.
//!
//! Derivatives come from the analytic `∂_ε ln w_n`. The normalization is
//! differentiated from the same truncated sums,
//! `∂p_n = p_n (∂ ln w_n - Σ_m p_m ∂ ln w_m)`, so `Σ ∂p_n = 0` holds exactly
//! up to rounding. Central differences with a Richardson check are available
//! as a validation path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{DeformationKind, DeformationParams};
use crate::error::{Error, Result};
use crate::states::{
    distribution, fixed_support_probs, mean_photon, ProbeClass, ProbeSpec, DEFAULT_TOL,
};

/// Probabilities below this are left out of the information sums.
pub const PROB_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeConfig {
    pub method: DerivativeMethod,
    /// Central-difference step; defaults to `max(1e-7, 1e-3 |epsilon|)`.
    pub step: Option<f64>,
    /// Largest tolerated relative disagreement between the step-`h` and
    /// step-`h/2` estimates.
    pub richardson_factor: f64,
    /// Truncation tolerance of the underlying distributions.
    pub tol: f64,
}

impl Default for DerivativeConfig {
    fn default() -> Self {
        Self {
            method: DerivativeMethod::Analytic,
            step: None,
            richardson_factor: 1e-3,
            tol: DEFAULT_TOL,
        }
    }
}

impl DerivativeConfig {
    pub fn finite_difference() -> Self {
        Self {
            method: DerivativeMethod::FiniteDifference,
            ..Self::default()
        }
    }

    fn step_for(&self, epsilon: f64) -> f64 {
        self.step
            .unwrap_or_else(|| (1e-3 * epsilon.abs()).max(1e-7))
    }
}

/// An information value with a bound on the contribution left out
/// (floored probabilities and an estimate of the truncated tail).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Information {
    pub value: f64,
    pub error_bar: f64,
    pub n_max: usize,
}

/// Probabilities and their ε-derivatives on a common support.
struct Sensitivity {
    probs: Vec<f64>,
    dprobs: Vec<f64>,
    tail_bound: f64,
}

fn analytic_sensitivity(
    spec: &ProbeSpec,
    params: &DeformationParams,
    tol: f64,
) -> Result<Sensitivity> {
    let dist = distribution(spec, params, tol)?;
    let d = spec.d_log_weights(params, dist.len());
    let mean_score: f64 = dist.probs.iter().zip(&d).map(|(p, s)| p * s).sum();
    let dprobs: Vec<f64> = dist
        .probs
        .iter()
        .zip(&d)
        .map(|(p, s)| if *p > 0.0 { p * (s - mean_score) } else { 0.0 })
        .collect();
    Ok(Sensitivity {
        probs: dist.probs,
        dprobs,
        tail_bound: dist.tail_bound,
    })
}

/// Central differences of `f` at steps `h` and `h/2` and their Richardson
/// combination `(4 D(h/2) - D(h)) / 3`.
fn central_differences(
    params: &DeformationParams,
    h: f64,
    f: impl Fn(&DeformationParams) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let eps = params.epsilon();
    let at = |e: f64| -> Result<Vec<f64>> { f(&params.with_epsilon(e)?) };
    let (p1, m1) = (at(eps + h)?, at(eps - h)?);
    let (p2, m2) = (at(eps + h / 2.0)?, at(eps - h / 2.0)?);
    let d1: Vec<f64> = p1
        .iter()
        .zip(&m1)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let d2: Vec<f64> = p2.iter().zip(&m2).map(|(a, b)| (a - b) / h).collect();
    let rich = d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| (4.0 * b - a) / 3.0)
        .collect();
    Ok((d1, d2, rich))
}

/// Common support for a finite-difference stencil: the largest adaptive
/// truncation among the stencil points that converge.
fn stencil_support(
    spec: &ProbeSpec,
    params: &DeformationParams,
    h: f64,
    tol: f64,
) -> Result<(usize, f64)> {
    let center = distribution(spec, params, tol)?;
    let mut len = center.len();
    let eps = params.epsilon();
    for e in [eps - h, eps + h, eps - h / 2.0, eps + h / 2.0] {
        if let Ok(p) = params.with_epsilon(e) {
            if let Ok(d) = distribution(spec, &p, tol) {
                len = len.max(d.len());
            }
        }
    }
    Ok((len, center.tail_bound))
}

fn check_richardson(coarse: f64, fine: f64, factor: f64) -> Result<()> {
    let scale = coarse.abs().max(fine.abs());
    if scale > 0.0 && (coarse - fine).abs() > factor * scale {
        return Err(Error::DerivativeInstability(format!(
            "step-h and step-h/2 estimates differ: {coarse} vs {fine}"
        )));
    }
    Ok(())
}

fn fisher_sum(probs: &[f64], dprobs: &[f64]) -> (f64, f64) {
    let mut value = 0.0;
    let mut dropped = 0.0;
    for (p, dp) in probs.iter().zip(dprobs) {
        if *p >= PROB_FLOOR {
            value += dp * dp / p;
        } else if *p > 0.0 {
            dropped += dp * dp / p;
        }
    }
    (value, dropped)
}

/// Crude estimate of the information carried by the omitted tail: the tail
/// mass times the squared score at the truncation edge, with a factor 4 for
/// the growth of the score beyond it.
fn tail_estimate(s: &Sensitivity) -> f64 {
    let last = s
        .probs
        .iter()
        .zip(&s.dprobs)
        .rev()
        .find(|(p, _)| **p > 0.0)
        .map(|(p, dp)| (dp / p).powi(2))
        .unwrap_or(0.0);
    4.0 * s.tail_bound * last
}

/// Classical Fisher information of the photon-number measurement,
/// `F = Σ_n (∂_ε p_n)² / p_n`.
pub fn classical_fisher(
    spec: &ProbeSpec,
    params: &DeformationParams,
    cfg: &DerivativeConfig,
) -> Result<Information> {
    match cfg.method {
        DerivativeMethod::Analytic => {
            let s = analytic_sensitivity(spec, params, cfg.tol)?;
            let (value, dropped) = fisher_sum(&s.probs, &s.dprobs);
            Ok(Information {
                value,
                error_bar: dropped + tail_estimate(&s),
                n_max: s.probs.len() - 1,
            })
        }
        DerivativeMethod::FiniteDifference => {
            let h = cfg.step_for(params.epsilon());
            let (len, tail_bound) = stencil_support(spec, params, h, cfg.tol)?;
            let probs = fixed_support_probs(spec, params, len);
            let (d1, d2, rich) =
                central_differences(params, h, |p| Ok(fixed_support_probs(spec, p, len)))?;
            let (f1, _) = fisher_sum(&probs, &d1);
            let (f2, _) = fisher_sum(&probs, &d2);
            check_richardson(f1, f2, cfg.richardson_factor)?;
            let (value, dropped) = fisher_sum(&probs, &rich);
            let s = Sensitivity {
                probs,
                dprobs: rich,
                tail_bound,
            };
            Ok(Information {
                value,
                error_bar: dropped + tail_estimate(&s),
                n_max: len - 1,
            })
        }
    }
}

/// QFI of a pure probe from its real amplitudes, `H = 4 Σ_n (∂_ε ψ_n)²`.
pub fn qfi_pure(
    spec: &ProbeSpec,
    params: &DeformationParams,
    cfg: &DerivativeConfig,
) -> Result<Information> {
    if !spec.is_pure() {
        return Err(Error::Domain(format!(
            "qfi_pure needs a pure probe, got {spec:?}"
        )));
    }
    let (amps, damps, n_max) = match cfg.method {
        DerivativeMethod::Analytic => {
            let s = analytic_sensitivity(spec, params, cfg.tol)?;
            // ψ = sqrt(p), ∂ψ = ∂p / (2ψ)
            let amps: Vec<f64> = s.probs.iter().map(|p| p.sqrt()).collect();
            let damps = amps
                .iter()
                .zip(&s.dprobs)
                .map(|(a, dp)| if *a > 0.0 { 0.5 * dp / a } else { 0.0 })
                .collect();
            let n = s.probs.len() - 1;
            (amps, damps, n)
        }
        DerivativeMethod::FiniteDifference => {
            let h = cfg.step_for(params.epsilon());
            let (len, _) = stencil_support(spec, params, h, cfg.tol)?;
            let amplitudes = |p: &DeformationParams| -> Result<Vec<f64>> {
                Ok(fixed_support_probs(spec, p, len)
                    .into_iter()
                    .map(f64::sqrt)
                    .collect())
            };
            let amps = amplitudes(params)?;
            let (d1, d2, rich) = central_differences(params, h, amplitudes)?;
            let sq = |v: &[f64]| 4.0 * v.iter().map(|x| x * x).sum::<f64>();
            check_richardson(sq(&d1), sq(&d2), cfg.richardson_factor)?;
            (amps, rich, len - 1)
        }
    };
    let mut value = 0.0;
    let mut dropped = 0.0;
    for (a, da) in amps.iter().zip(&damps) {
        if a * a >= PROB_FLOOR {
            value += 4.0 * da * da;
        } else {
            dropped += 4.0 * da * da;
        }
    }
    Ok(Information {
        value,
        error_bar: dropped,
        n_max,
    })
}

/// QFI of a Fock-diagonal probe, `H = Σ_k (∂_ε ρ_k)² / ρ_k`.
///
/// The eigenbasis `{|k⟩}` is ε-independent, so the off-diagonal SLD term
/// vanishes and the summand is the classical one.
pub fn qfi_diagonal(
    spec: &ProbeSpec,
    params: &DeformationParams,
    cfg: &DerivativeConfig,
) -> Result<Information> {
    if spec.is_pure() {
        return Err(Error::Domain(format!(
            "qfi_diagonal needs a Fock-diagonal mixed probe, got {spec:?}"
        )));
    }
    classical_fisher(spec, params, cfg)
}

/// QFI through the route appropriate for the probe.
pub fn quantum_fisher(
    spec: &ProbeSpec,
    params: &DeformationParams,
    cfg: &DerivativeConfig,
) -> Result<Information> {
    if spec.is_pure() {
        qfi_pure(spec, params, cfg)
    } else {
        qfi_diagonal(spec, params, cfg)
    }
}

/// `Q_ε = ε² H(ε)`.
pub fn qsnr(epsilon: f64, qfi: f64) -> f64 {
    epsilon * epsilon * qfi
}

/// Measurements for a 3σ interval of relative error `delta`: `9 / (δ² Q)`.
/// Returns `+inf` when `qsnr == 0`.
pub fn measurements_needed(delta: f64, qsnr: f64) -> Result<f64> {
    if delta.is_nan() || delta <= 0.0 || qsnr.is_nan() || qsnr < 0.0 {
        return Err(Error::Domain(format!(
            "need delta > 0 and qsnr >= 0, got delta = {delta}, qsnr = {qsnr}"
        )));
    }
    if qsnr == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(9.0 / (delta * delta * qsnr))
}

/// Tabulated leading-order QSNR for intensity measurements:
///
/// | | coherent | superposition | thermal |
/// |---|---|---|---|
/// | P | 2/9 ε⁴N⁴ | 2/9 ε⁴N⁴ | 40 ε⁴N⁴ |
/// | M | 1/8 ε²N² | 1/8 ε²N² | ε²N² |
pub fn leading_order_qsnr(class: ProbeClass, kind: DeformationKind, epsilon: f64, n: f64) -> f64 {
    let en = epsilon * n;
    match (kind, class) {
        (DeformationKind::P, ProbeClass::Thermal) => 40.0 * en.powi(4),
        (DeformationKind::P, _) => 2.0 / 9.0 * en.powi(4),
        (DeformationKind::M, ProbeClass::Thermal) => en * en,
        (DeformationKind::M, _) => en * en / 8.0,
    }
}

/// Information quantities for one (probe, kind, ε) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub spec: ProbeSpec,
    pub kind: DeformationKind,
    pub epsilon: f64,
    pub fisher: f64,
    pub qfi: f64,
    pub qsnr: f64,
    pub n_mean: f64,
    /// `9 / Q_ε`, so that `M_δ = m_delta_coefficient / δ²`; `null` when `Q_ε = 0`.
    #[serde(with = "crate::serde_util")]
    pub m_delta_coefficient: f64,
}

pub fn report(
    spec: &ProbeSpec,
    params: &DeformationParams,
    cfg: &DerivativeConfig,
) -> Result<EstimationReport> {
    let fisher = classical_fisher(spec, params, cfg)?.value;
    let qfi = quantum_fisher(spec, params, cfg)?.value;
    let q = qsnr(params.epsilon(), qfi);
    let n_mean = mean_photon(&distribution(spec, params, cfg.tol)?);
    Ok(EstimationReport {
        spec: *spec,
        kind: params.kind(),
        epsilon: params.epsilon(),
        fisher,
        qfi,
        qsnr: q,
        n_mean,
        m_delta_coefficient: measurements_needed(1.0, q)?,
    })
}

/// One row of a QSNR sweep. `intensity` is the undeformed parameter
/// (`|α|²` or `n_T`); `n_mean` is the deformed mean photon number used in the
/// leading-order formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsnrRow {
    pub class: ProbeClass,
    pub kind: DeformationKind,
    pub epsilon: f64,
    pub intensity: f64,
    pub n_mean: f64,
    pub fisher: f64,
    pub qfi: f64,
    pub qsnr: f64,
    pub qsnr_leading: f64,
    /// `qsnr / qsnr_leading`; absent at ε = 0 where both vanish.
    pub ratio: Option<f64>,
    /// `|ε| N <= 1`, the regime where the leading-order table applies.
    pub valid: bool,
}

pub fn qsnr_row(
    class: ProbeClass,
    kind: DeformationKind,
    epsilon: f64,
    intensity: f64,
    cfg: &DerivativeConfig,
) -> Result<QsnrRow> {
    let spec = class.probe(intensity)?;
    let params = DeformationParams::new(kind, epsilon)?;
    let r = report(&spec, &params, cfg)?;
    let leading = leading_order_qsnr(class, kind, epsilon, r.n_mean);
    Ok(QsnrRow {
        class,
        kind,
        epsilon,
        intensity,
        n_mean: r.n_mean,
        fisher: r.fisher,
        qfi: r.qfi,
        qsnr: r.qsnr,
        qsnr_leading: leading,
        ratio: (leading > 0.0).then(|| r.qsnr / leading),
        valid: (epsilon * r.n_mean).abs() <= 1.0,
    })
}

/// Rows for the grid `epsilons × intensities`, epsilon-major, computed in
/// parallel and returned in grid order.
pub fn qsnr_sweep(
    class: ProbeClass,
    kind: DeformationKind,
    epsilons: &[f64],
    intensities: &[f64],
    cfg: &DerivativeConfig,
) -> Result<Vec<QsnrRow>> {
    if epsilons.is_empty() || intensities.is_empty() {
        return Err(Error::Domain("empty sweep grid".into()));
    }
    let grid: Vec<(f64, f64)> = epsilons
        .iter()
        .flat_map(|&e| intensities.iter().map(move |&n| (e, n)))
        .collect();
    grid.par_iter()
        .map(|&(e, n)| qsnr_row(class, kind, e, n, cfg))
        .collect()
}
