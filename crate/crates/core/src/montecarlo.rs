//! Simulated photon counting and maximum-likelihood estimation of `epsilon`.
//!
//! Replication `r` of a benchmark draws from a ChaCha8 generator seeded with
//! the benchmark seed and switched to stream `r`, so every replication owns an
//! independent, reproducible stream regardless of scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{DeformationKind, DeformationParams};
use crate::error::{Error, Result};
use crate::estimation::{quantum_fisher, DerivativeConfig};
use crate::states::{distribution, PhotonDistribution, ProbeSpec, DEFAULT_TOL};

/// Outcomes whose model probability is below this are out of support.
const MIN_OUTCOME_PROB: f64 = 1e-300;

/// Golden-section stopping width.
pub const MLE_TOL: f64 = 1e-10;
pub const MLE_MAX_ITER: usize = 200;
const COARSE_GRID: usize = 9;

/// Histogram of observed Fock outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSample {
    pub counts: BTreeMap<usize, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl CountSample {
    pub fn mean(&self) -> f64 {
        let total: f64 = self.counts.iter().map(|(n, c)| *n as f64 * *c as f64).sum();
        total / self.shots as f64
    }

    pub fn max_outcome(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }
}

/// Draws `shots` i.i.d. photon counts by inverse-CDF lookup.
pub fn sample_counts(dist: &PhotonDistribution, shots: u64, seed: u64) -> Result<CountSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = sample_with_rng(dist, shots, &mut rng)?;
    sample.seed = seed;
    Ok(sample)
}

fn sample_with_rng<R: Rng>(
    dist: &PhotonDistribution,
    shots: u64,
    rng: &mut R,
) -> Result<CountSample> {
    if shots == 0 {
        return Err(Error::Domain("shots must be positive".into()));
    }
    let total: f64 = dist.probs.iter().sum();
    let mut acc = 0.0;
    let cdf: Vec<f64> = dist
        .probs
        .iter()
        .map(|p| {
            acc += p / total;
            acc
        })
        .collect();
    let last = cdf.len() - 1;
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.random();
        let n = cdf.partition_point(|c| *c <= u).min(last);
        *counts.entry(n).or_insert(0) += 1;
    }
    Ok(CountSample {
        counts,
        shots,
        seed: 0,
    })
}

/// Photon-counting likelihood over a fixed outcome support.
///
/// The support is sized once from the adaptive truncations at the bracket
/// points (and the largest observed outcome), so that every ε evaluation is
/// normalized over the same outcomes. Where the untruncated series diverges
/// (M with ε < 0), this is the finite-support model.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    spec: ProbeSpec,
    kind: DeformationKind,
    support_len: usize,
}

impl LikelihoodModel {
    pub fn for_bracket(
        spec: &ProbeSpec,
        kind: DeformationKind,
        bracket: (f64, f64),
        min_len: usize,
    ) -> Result<Self> {
        let (lo, hi) = bracket;
        let mut len = None;
        let mut last_err = None;
        for e in [lo, 0.5 * (lo + hi), hi] {
            match DeformationParams::new(kind, e).and_then(|p| distribution(spec, &p, DEFAULT_TOL))
            {
                Ok(d) => len = Some(len.unwrap_or(0).max(d.len())),
                Err(err) => last_err = Some(err),
            }
        }
        match (len, last_err) {
            (Some(len), _) => Ok(Self {
                spec: *spec,
                kind,
                support_len: len.max(min_len),
            }),
            (None, Some(err)) => Err(err),
            (None, None) => unreachable!(),
        }
    }

    pub fn support_len(&self) -> usize {
        self.support_len
    }

    fn log_probs(&self, epsilon: f64) -> Result<(Vec<f64>, DeformationParams)> {
        let params = DeformationParams::new(self.kind, epsilon)?;
        let lw = self.spec.log_weights(&params, self.support_len);
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lw.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        Ok((lw.into_iter().map(|x| x - lse).collect(), params))
    }

    /// `ℓ(ε) = Σ_n counts[n] ln p_n(ε)`.
    pub fn log_likelihood(&self, sample: &CountSample, epsilon: f64) -> Result<f64> {
        let (lp, _) = self.log_probs(epsilon)?;
        let floor = MIN_OUTCOME_PROB.ln();
        let mut ll = 0.0;
        for (&n, &c) in &sample.counts {
            match lp.get(n) {
                Some(&v) if v >= floor => ll += c as f64 * v,
                _ => {
                    return Err(Error::OutOfSupport {
                        outcome: n,
                        epsilon,
                    })
                }
            }
        }
        Ok(ll)
    }

    /// Score `Σ_n counts[n] ∂_ε ln p_n(ε)`.
    pub fn score(&self, sample: &CountSample, epsilon: f64) -> Result<f64> {
        let (lp, params) = self.log_probs(epsilon)?;
        let d = self.spec.d_log_weights(&params, self.support_len);
        let mean: f64 = lp.iter().zip(&d).map(|(l, s)| l.exp() * s).sum();
        Ok(sample
            .counts
            .iter()
            .map(|(&n, &c)| c as f64 * (d[n] - mean))
            .sum())
    }
}

/// Log-likelihood of `sample` under the probe at `epsilon`.
pub fn log_likelihood(
    sample: &CountSample,
    spec: &ProbeSpec,
    kind: DeformationKind,
    epsilon: f64,
) -> Result<f64> {
    let min_len = sample.max_outcome().map_or(0, |n| n + 1);
    LikelihoodModel::for_bracket(spec, kind, (epsilon, epsilon), min_len)?
        .log_likelihood(sample, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub epsilon_hat: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    /// The coarse grid showed more than one local maximum.
    pub multimodal: bool,
}

/// Maximum-likelihood estimate of ε on `bracket`.
pub fn mle_epsilon(
    sample: &CountSample,
    spec: &ProbeSpec,
    kind: DeformationKind,
    bracket: (f64, f64),
) -> Result<MleResult> {
    check_bracket(bracket)?;
    let min_len = sample.max_outcome().map_or(0, |n| n + 1);
    let model = LikelihoodModel::for_bracket(spec, kind, bracket, min_len)?;
    mle_with_model(&model, sample, bracket)
}

fn check_bracket((lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > -1.0 && lo <= hi) {
        return Err(Error::Domain(format!(
            "bracket ({lo}, {hi}) must satisfy -1 < lo <= hi"
        )));
    }
    Ok(())
}

fn mle_with_model(
    model: &LikelihoodModel,
    sample: &CountSample,
    (lo, hi): (f64, f64),
) -> Result<MleResult> {
    if lo == hi {
        return Ok(MleResult {
            epsilon_hat: lo,
            log_likelihood: model.log_likelihood(sample, lo)?,
            converged: true,
            iterations: 0,
            multimodal: false,
        });
    }

    // An outcome outside the support at some ε makes ℓ = -inf there.
    let ll = |e: f64| match model.log_likelihood(sample, e) {
        Err(Error::OutOfSupport { .. }) => Ok(f64::NEG_INFINITY),
        other => other,
    };
    let step = (hi - lo) / (COARSE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..COARSE_GRID).map(|i| lo + step * i as f64).collect();
    let values = grid.iter().map(|&e| ll(e)).collect::<Result<Vec<_>>>()?;
    let peaks = (0..COARSE_GRID)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i == COARSE_GRID - 1 || values[i] > values[i + 1];
            left && right
        })
        .count();
    let best = (0..COARSE_GRID)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    if values[best] == f64::NEG_INFINITY {
        // nowhere on the grid does the model support the sample
        model.log_likelihood(sample, grid[best])?;
    }

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(COARSE_GRID - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (ll(c)?, ll(d)?);
    let mut iterations = 0;
    while b - a > MLE_TOL && iterations < MLE_MAX_ITER {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ll(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ll(d)?;
        }
        iterations += 1;
    }
    let (epsilon_hat, log_likelihood) = if fc >= fd { (c, fc) } else { (d, fd) };
    let interior = epsilon_hat - lo > 2.0 * MLE_TOL && hi - epsilon_hat > 2.0 * MLE_TOL;
    Ok(MleResult {
        epsilon_hat,
        log_likelihood,
        converged: b - a <= MLE_TOL && interior,
        iterations,
        multimodal: peaks > 1,
    })
}

/// Empirical MLE variance versus the Cramér-Rao bound `1/(M H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbBenchmark {
    pub spec: ProbeSpec,
    pub kind: DeformationKind,
    pub epsilon_true: f64,
    pub shots: u64,
    pub replications: usize,
    pub failed_replications: usize,
    pub seed: u64,
    pub qfi: f64,
    pub mean_estimate: f64,
    pub empirical_var: f64,
    /// `1/(M H)`; `null` in JSON when `H = 0`.
    #[serde(with = "crate::serde_util")]
    pub crb: f64,
    pub ratio: f64,
    pub bias: f64,
    /// Standard error of the mean estimate, `sqrt(var / successful)`.
    pub std_error: f64,
    pub estimable: bool,
}

/// Default search bracket: `ε ± max(0.02, 20/sqrt(M H))`, clipped to (-0.5, 0.5).
pub fn default_bracket(epsilon_true: f64, shots: u64, qfi: f64) -> Result<(f64, f64)> {
    let half = (20.0 / (shots as f64 * qfi).sqrt()).max(0.02);
    let lo = (epsilon_true - half).max(-0.5);
    let hi = (epsilon_true + half).min(0.5);
    if !(lo < epsilon_true && epsilon_true < hi) {
        return Err(Error::Domain(format!(
            "epsilon_true = {epsilon_true} must lie in (-0.5, 0.5)"
        )));
    }
    Ok((lo, hi))
}

pub fn crb_benchmark(
    spec: &ProbeSpec,
    kind: DeformationKind,
    epsilon_true: f64,
    shots: u64,
    replications: usize,
    seed: u64,
) -> Result<CrbBenchmark> {
    if shots == 0 {
        return Err(Error::Domain("shots must be positive".into()));
    }
    if replications < 50 {
        return Err(Error::Domain(format!(
            "at least 50 replications are needed, got {replications}"
        )));
    }
    let params = DeformationParams::new(kind, epsilon_true)?;
    let dist = distribution(spec, &params, DEFAULT_TOL)?;
    let qfi = quantum_fisher(spec, &params, &DerivativeConfig::default())?.value;
    let crb = if qfi > 0.0 {
        1.0 / (shots as f64 * qfi)
    } else {
        f64::INFINITY
    };
    let bracket = default_bracket(epsilon_true, shots, qfi)?;
    let model = LikelihoodModel::for_bracket(spec, kind, bracket, dist.len())?;

    let outcomes: Vec<Result<MleResult>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let sample = sample_with_rng(&dist, shots, &mut rng)?;
            mle_with_model(&model, &sample, bracket)
        })
        .collect();

    let estimates: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| match o {
            Ok(m) if m.converged => Some(m.epsilon_hat),
            _ => None,
        })
        .collect();
    let failed = replications - estimates.len();
    if failed * 20 >= replications {
        let first = outcomes
            .iter()
            .find_map(|o| o.as_ref().err().map(|e| e.to_string()))
            .unwrap_or_else(|| "did not converge".into());
        return Err(Error::Benchmark(format!(
            "{failed} of {replications} replications failed (first: {first})"
        )));
    }

    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(CrbBenchmark {
        spec: *spec,
        kind,
        epsilon_true,
        shots,
        replications,
        failed_replications: failed,
        seed,
        qfi,
        mean_estimate: mean,
        empirical_var: var,
        crb,
        ratio: if crb.is_finite() { var / crb } else { 0.0 },
        bias: mean - epsilon_true,
        std_error: (var / k).sqrt(),
        estimable: qfi > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{coherent_distribution, mean_photon};

    fn m0() -> DeformationParams {
        DeformationParams::undeformed(DeformationKind::M)
    }

    #[test]
    fn point_mass_samples_deterministically() {
        let mut dist = coherent_distribution(1.0, &m0(), DEFAULT_TOL).unwrap();
        dist.probs = vec![1.0];
        dist.n_max = 0;
        let s = sample_counts(&dist, 10, 3).unwrap();
        assert_eq!(s.counts, BTreeMap::from([(0, 10)]));
        assert!(sample_counts(&dist, 0, 3).is_err());
    }

    #[test]
    fn poisson_sample_mean_and_determinism() {
        let dist = coherent_distribution(1.0, &m0(), DEFAULT_TOL).unwrap();
        let a = sample_counts(&dist, 100_000, 11).unwrap();
        let b = sample_counts(&dist, 100_000, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<u64>(), 100_000);
        let sigma = (1.0f64 / 100_000.0).sqrt();
        assert!((a.mean() - 1.0).abs() < 4.0 * sigma);
        let c = sample_counts(&dist, 100_000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cat_samples_are_even() {
        let params = DeformationParams::new(DeformationKind::P, 0.01).unwrap();
        let dist = distribution(&ProbeSpec::cat(3.0).unwrap(), &params, DEFAULT_TOL).unwrap();
        let s = sample_counts(&dist, 20_000, 5).unwrap();
        assert!(s.counts.keys().all(|n| n % 2 == 0));
        let se = (2.0 * mean_photon(&dist) / 20_000.0).sqrt() * 3.0;
        assert!((s.mean() - mean_photon(&dist)).abs() < 5.0 * se);
    }

    #[test]
    fn likelihood_of_vacuum_counts() {
        let spec = ProbeSpec::coherent(2.5).unwrap();
        let sample = CountSample {
            counts: BTreeMap::from([(0, 40)]),
            shots: 40,
            seed: 0,
        };
        let ll = log_likelihood(&sample, &spec, DeformationKind::M, 0.0).unwrap();
        assert!((ll + 40.0 * 2.5).abs() < 1e-9);

        let single = CountSample {
            counts: BTreeMap::from([(3, 1)]),
            shots: 1,
            seed: 0,
        };
        let ll = log_likelihood(&single, &spec, DeformationKind::M, 0.0).unwrap();
        let expected = -2.5 + 3.0 * 2.5f64.ln() - 6f64.ln();
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn likelihood_scales_with_multiplicity() {
        let spec = ProbeSpec::thermal_from_mean(2.0).unwrap();
        let one = CountSample {
            counts: BTreeMap::from([(0, 3), (2, 5), (7, 1)]),
            shots: 9,
            seed: 0,
        };
        let mut two = one.clone();
        two.counts.values_mut().for_each(|c| *c *= 2);
        two.shots *= 2;
        let a = log_likelihood(&one, &spec, DeformationKind::P, 0.02).unwrap();
        let b = log_likelihood(&two, &spec, DeformationKind::P, 0.02).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn odd_outcome_is_out_of_support_for_cat() {
        let spec = ProbeSpec::cat(2.0).unwrap();
        let sample = CountSample {
            counts: BTreeMap::from([(1, 1)]),
            shots: 1,
            seed: 0,
        };
        assert!(matches!(
            log_likelihood(&sample, &spec, DeformationKind::M, 0.0),
            Err(Error::OutOfSupport { outcome: 1, .. })
        ));
    }

    #[test]
    fn degenerate_bracket() {
        let spec = ProbeSpec::coherent(2.0).unwrap();
        let dist = coherent_distribution(2.0, &m0(), DEFAULT_TOL).unwrap();
        let s = sample_counts(&dist, 100, 1).unwrap();
        let r = mle_epsilon(&s, &spec, DeformationKind::M, (0.01, 0.01)).unwrap();
        assert!(r.converged);
        assert_eq!(r.epsilon_hat, 0.01);
        assert_eq!(r.iterations, 0);
        assert!(mle_epsilon(&s, &spec, DeformationKind::M, (0.1, 0.0)).is_err());
        assert!(mle_epsilon(&s, &spec, DeformationKind::M, (-1.0, 0.0)).is_err());
    }

    #[test]
    fn mle_recovers_zero_within_crb_scale() {
        let spec = ProbeSpec::coherent(10.0).unwrap();
        let params = DeformationParams::undeformed(DeformationKind::M);
        let dist = distribution(&spec, &params, DEFAULT_TOL).unwrap();
        let shots = 200_000;
        let s = sample_counts(&dist, shots, 99).unwrap();
        let r = mle_epsilon(&s, &spec, DeformationKind::M, (-0.05, 0.05)).unwrap();
        assert!(r.converged && !r.multimodal);
        let f = quantum_fisher(&spec, &params, &DerivativeConfig::default())
            .unwrap()
            .value;
        assert!(
            r.epsilon_hat.abs() < 3.0 / (shots as f64 * f).sqrt(),
            "{}",
            r.epsilon_hat
        );

        // score vanishes at the maximum
        let model =
            LikelihoodModel::for_bracket(&spec, DeformationKind::M, (-0.05, 0.05), 0).unwrap();
        let score = model.score(&s, r.epsilon_hat).unwrap();
        let curvature = shots as f64 * f;
        assert!(score.abs() < 1e-6 * curvature, "{score} vs {curvature}");
    }

    #[test]
    fn benchmark_is_deterministic_and_crb_scales_with_shots() {
        let spec = ProbeSpec::coherent(5.0).unwrap();
        let a = crb_benchmark(&spec, DeformationKind::M, 0.01, 500, 50, 7).unwrap();
        let b = crb_benchmark(&spec, DeformationKind::M, 0.01, 500, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = crb_benchmark(&spec, DeformationKind::M, 0.01, 1000, 50, 7).unwrap();
        assert_eq!(c.crb, a.crb / 2.0);
        assert!(a.estimable && a.crb > 0.0);
        assert!(crb_benchmark(&spec, DeformationKind::M, 0.01, 0, 50, 7).is_err());
        assert!(crb_benchmark(&spec, DeformationKind::M, 0.01, 100, 10, 7).is_err());
    }

    #[test]
    fn zero_deformation_p_is_not_estimable() {
        let spec = ProbeSpec::thermal_from_mean(2.0).unwrap();
        let r = crb_benchmark(&spec, DeformationKind::P, 0.0, 200, 50, 3).unwrap();
        assert!(!r.estimable);
        assert_eq!(r.crb, f64::INFINITY);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"crb\":null"));
        let back: CrbBenchmark = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn count_sample_round_trips_through_json() {
        let sample = CountSample {
            counts: BTreeMap::from([(0, 2), (4, 9)]),
            shots: 11,
            seed: 42,
        };
        let back: CountSample =
            serde_json::from_str(&serde_json::to_string(&sample).unwrap()).unwrap();
        assert_eq!(back, sample);
    }
}
