//! Deformed q-numbers and factorials for the M and P boson deformations.
//!
//! With `q = 1 + epsilon` the two algebras are
//!
//! * M: `a a† - q a† a = 1`, basic number `[n] = (q^n - 1)/(q - 1)`,
//! * P: `a a† - q a† a = q^{-N}`, symmetric number `[n] = (q^n - q^{-n})/(q - q^{-1})`.
//!
//! The deformed factorial `Δ_n = [1][2]…[n]` replaces `n!` in coherent-state
//! amplitudes and the energy coefficient `γ_n = [n]` enters the thermal
//! Boltzmann weights. Everything is evaluated in log domain: `Δ_n` overflows
//! `f64` near `n = 170` even without deformation.

use std::fmt;
use std::ops::{Mul, Sub};
use std::str::FromStr;

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which deformed commutation relation governs the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeformationKind {
    M,
    P,
}

impl fmt::Display for DeformationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeformationKind::M => f.write_str("M"),
            DeformationKind::P => f.write_str("P"),
        }
    }
}

impl FromStr for DeformationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" => Ok(DeformationKind::M),
            "P" | "p" => Ok(DeformationKind::P),
            other => Err(Error::Domain(format!(
                "unknown deformation kind {other:?} (expected M or P)"
            ))),
        }
    }
}

/// A deformation kind together with its strength `epsilon = q - 1`.
///
/// Construction enforces `epsilon > -1` (so that `q > 0`) and finiteness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct DeformationParams {
    kind: DeformationKind,
    epsilon: f64,
}

#[derive(Deserialize)]
struct RawParams {
    kind: DeformationKind,
    epsilon: f64,
}

impl TryFrom<RawParams> for DeformationParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        DeformationParams::new(raw.kind, raw.epsilon)
    }
}

impl DeformationParams {
    pub fn new(kind: DeformationKind, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= -1.0 {
            return Err(Error::Domain(format!(
                "epsilon must be finite and > -1, got {epsilon}"
            )));
        }
        Ok(Self { kind, epsilon })
    }

    /// The undeformed oscillator of the given kind.
    pub fn undeformed(kind: DeformationKind) -> Self {
        Self { kind, epsilon: 0.0 }
    }

    pub fn kind(&self) -> DeformationKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `q = 1 + epsilon`.
    pub fn q(&self) -> f64 {
        1.0 + self.epsilon
    }

    /// Same kind, different strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kind, epsilon)
    }
}

/// `ln(e^x - 1)` for `x > 0`.
fn ln_expm1(x: f64) -> f64 {
    if x > 36.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln sinh(y)` for `y > 0`.
fn ln_sinh(y: f64) -> f64 {
    y - std::f64::consts::LN_2 + (-(-2.0 * y).exp_m1()).ln()
}

/// `ln [n]`; `-inf` for `n = 0`.
pub fn ln_q_number(params: &DeformationParams, n: u64) -> f64 {
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    let eps = params.epsilon;
    let nf = n as f64;
    if eps == 0.0 {
        return nf.ln();
    }
    let l = eps.ln_1p();
    match params.kind {
        DeformationKind::M => {
            let x = nf * l;
            if eps > 0.0 {
                ln_expm1(x) - eps.ln()
            } else {
                (-x.exp_m1()).ln() - (-eps).ln()
            }
        }
        // [n] = sinh(n t) / sinh(t) with t = ln q; even in t.
        DeformationKind::P => {
            let t = l.abs();
            ln_sinh(nf * t) - ln_sinh(t)
        }
    }
}

/// The deformed number `[n]`: `[0] = 0`, `[1] = 1`, and `[n] = n` at `epsilon = 0`.
pub fn q_number(params: &DeformationParams, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else if params.epsilon == 0.0 {
        n as f64
    } else {
        ln_q_number(params, n).exp()
    }
}

/// `ln Δ_n = Σ_{j=1}^{n} ln [j]`.
pub fn log_delta(params: &DeformationParams, n: u64) -> f64 {
    (1..=n).map(|j| ln_q_number(params, j)).sum()
}

/// `ln Δ_n` for `n = 0..len`, accumulated left to right.
pub fn log_delta_table(params: &DeformationParams, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    for n in 0..len {
        if n > 0 {
            acc += ln_q_number(params, n as u64);
        }
        out.push(acc);
    }
    out
}

/// `∂_ε ln [j]` for `j = 0..len` (entry 0 is defined as 0).
///
/// Uses the geometric-sum representation `[j]_M = Σ_{k<j} q^k`, whose
/// log-derivative `Σ k q^{k-1} / Σ q^k` is carried by a positive-term
/// recursion, so there is no cancellation near `epsilon = 0` and no overflow
/// for large `j`. For P, `[j]_P = q^{1-j} Σ_{k<j} q^{2k}`.
pub fn d_ln_q_number_table(params: &DeformationParams, len: usize) -> Vec<f64> {
    let eps = params.epsilon;
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(0.0);
    if eps == 0.0 {
        for j in 1..len {
            out.push(match params.kind {
                DeformationKind::M => (j as f64 - 1.0) / 2.0,
                DeformationKind::P => 0.0,
            });
        }
        return out;
    }
    let q = 1.0 + eps;
    match params.kind {
        DeformationKind::M => {
            geometric_log_derivative(q, len, |_, r| r, &mut out);
        }
        DeformationKind::P => {
            let big_q = q * q;
            geometric_log_derivative(
                big_q,
                len,
                |j, r| -(j as f64 - 1.0) / q + 2.0 * q * r,
                &mut out,
            );
        }
    }
    out
}

/// Runs the recursion for `R_j = d/dx ln Σ_{k<j} x^k` at `x = base` and
/// pushes `map(j, R_j)` for `j = 1..len`.
fn geometric_log_derivative(
    base: f64,
    len: usize,
    map: impl Fn(usize, f64) -> f64,
    out: &mut Vec<f64>,
) {
    // rho_j = x^j / S_j, S_j = Σ_{k<j} x^k
    let mut r = 0.0;
    let mut rho = base;
    for j in 1..len {
        out.push(map(j, r));
        let jf = j as f64;
        r = (r + jf / base * rho) / (1.0 + rho);
        rho = base * rho / (1.0 + rho);
    }
}

/// `g_n(a, b) = Π_{k=0}^{n-1} (1 - a b^k)`; the empty product is 1.
///
/// Generic so that oracle checks can run it in exact arithmetic.
pub fn g_product<T>(a: &T, b: &T, n: usize) -> T
where
    T: Clone + One + Sub<Output = T> + Mul<Output = T>,
{
    let mut acc = T::one();
    let mut pow = T::one();
    for _ in 0..n {
        acc = acc * (T::one() - a.clone() * pow.clone());
        pow = pow * b.clone();
    }
    acc
}

/// Low-order expansion of `Δ_n`:
/// M: `n! [1 + ε n(n-1)/4]`, P: `n! [1 + ε² n(n-1)(2n+5)/36]`.
pub fn delta_series(params: &DeformationParams, n: u64) -> f64 {
    let nf = n as f64;
    let eps = params.epsilon;
    let correction = match params.kind {
        DeformationKind::M => 0.25 * eps * nf * (nf - 1.0),
        DeformationKind::P => eps * eps * nf * (nf - 1.0) * (2.0 * nf + 5.0) / 36.0,
    };
    ln_factorial(n).exp() * (1.0 + correction)
}

/// Energy coefficient `γ_n`, which for both deformations coincides with `[n]`.
pub fn gamma_coefficient(params: &DeformationParams, n: u64) -> f64 {
    q_number(params, n)
}

/// Low-order expansion of `γ_n`:
/// M: `n + n(n-1) ε/2`, P: `n + n(n²-1) ε²/6`.
pub fn gamma_series(params: &DeformationParams, n: u64) -> f64 {
    let nf = n as f64;
    let eps = params.epsilon;
    match params.kind {
        DeformationKind::M => nf + 0.5 * nf * (nf - 1.0) * eps,
        DeformationKind::P => nf + nf * (nf * nf - 1.0) * eps * eps / 6.0,
    }
}

pub(crate) fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
