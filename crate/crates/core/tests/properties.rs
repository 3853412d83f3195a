use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;

use qdeform::algebra::{g_product, log_delta};
use qdeform::estimation::{classical_fisher, quantum_fisher};
use qdeform::montecarlo::sample_counts;
use qdeform::states::{distribution, mean_photon, DEFAULT_TOL};
use qdeform::{DeformationKind, DeformationParams, DerivativeConfig, Error, ProbeClass, ProbeSpec};

fn kind() -> impl Strategy<Value = DeformationKind> {
    prop_oneof![Just(DeformationKind::M), Just(DeformationKind::P)]
}

fn class() -> impl Strategy<Value = ProbeClass> {
    prop_oneof![
        Just(ProbeClass::Coherent),
        Just(ProbeClass::Superposition),
        Just(ProbeClass::Thermal)
    ]
}

/// M states with ε < 0 stop being normalizable once the weights stop decaying.
fn normalizable(class: ProbeClass, kind: DeformationKind, eps: f64, intensity: f64) -> bool {
    match (kind, class) {
        (DeformationKind::P, _) => true,
        (DeformationKind::M, _) if eps >= 0.0 => true,
        (DeformationKind::M, ProbeClass::Thermal) => false,
        (DeformationKind::M, _) => intensity * -eps < 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_are_normalized(
        kind in kind(),
        class in class(),
        eps in -0.05f64..0.05,
        intensity in 0.1f64..100.0,
    ) {
        let spec = class.probe(intensity).unwrap();
        let params = DeformationParams::new(kind, eps).unwrap();
        match distribution(&spec, &params, DEFAULT_TOL) {
            Ok(d) => {
                prop_assert!(normalizable(class, kind, eps, intensity));
                let total: f64 = d.probs.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(d.probs.iter().all(|p| *p >= 0.0));
                prop_assert!(d.tail_bound <= DEFAULT_TOL);
                prop_assert_eq!(d.len(), d.n_max + 1);
            }
            Err(Error::Divergence(_)) => prop_assert!(!normalizable(class, kind, eps, intensity)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn cat_states_have_no_odd_population(
        kind in kind(),
        eps in 0.0f64..0.05,
        alpha_sq in 0.1f64..50.0,
    ) {
        let spec = ProbeSpec::cat(alpha_sq).unwrap();
        let params = DeformationParams::new(kind, eps).unwrap();
        let d = distribution(&spec, &params, DEFAULT_TOL).unwrap();
        prop_assert!(d.probs.iter().skip(1).step_by(2).all(|p| *p == 0.0));
        let amps = d.amplitudes().unwrap();
        prop_assert!(amps.amps.iter().all(|a| *a >= 0.0));
    }

    #[test]
    fn log_delta_matches_rational_product(
        kind in kind(),
        num in -900i64..900,
        n in 0usize..25,
    ) {
        prop_assume!(num != 0);
        let e = BigRational::new(BigInt::from(num), BigInt::from(1000));
        let eps = e.to_f64().unwrap();
        let one = BigRational::one();
        let q = &one + &e;
        // Δ_n = Π_{j≤n} [j] with [j] = (q^j - 1)/ε or (q^j - q^{-j})/(q - q^{-1})
        let mut delta = one.clone();
        for j in 1..=n as i32 {
            let qj = q.pow(j);
            let bracket = match kind {
                DeformationKind::M => (&qj - &one) / &e,
                DeformationKind::P => (&qj - qj.recip()) / (&q - q.recip()),
            };
            delta *= bracket;
        }
        // M also through the g-product form, Δ_n = (-1/ε)^n g_n(q, q)
        if kind == DeformationKind::M {
            let via_g = (-one.clone() / &e).pow(n as i32) * g_product(&q, &q, n);
            prop_assert_eq!(&via_g, &delta);
        }
        let got = log_delta(&DeformationParams::new(kind, eps).unwrap(), n as u64);
        let want = delta.to_f64().unwrap().ln();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn fisher_equals_qfi(
        kind in kind(),
        class in class(),
        eps in 1e-4f64..0.02,
        intensity in 0.5f64..30.0,
    ) {
        let spec = class.probe(intensity).unwrap();
        let params = DeformationParams::new(kind, eps).unwrap();
        let cfg = DerivativeConfig::default();
        let f = classical_fisher(&spec, &params, &cfg).unwrap().value;
        let h = quantum_fisher(&spec, &params, &cfg).unwrap().value;
        prop_assert!(f > 0.0);
        prop_assert!((f - h).abs() <= 1e-6 * h);
    }

    #[test]
    fn sample_mean_is_consistent(
        kind in kind(),
        class in class(),
        eps in 0.0f64..0.02,
        intensity in 0.5f64..20.0,
        seed in any::<u64>(),
    ) {
        let spec = class.probe(intensity).unwrap();
        let d = distribution(&spec, &DeformationParams::new(kind, eps).unwrap(), DEFAULT_TOL).unwrap();
        let shots = 4000u64;
        let sample = sample_counts(&d, shots, seed).unwrap();
        prop_assert_eq!(sample.counts.values().sum::<u64>(), shots);
        let mean = mean_photon(&d);
        let var: f64 = d.probs.iter().enumerate().map(|(n, p)| p * (n as f64 - mean).powi(2)).sum();
        let se = (var / shots as f64).sqrt();
        prop_assert!((sample.mean() - mean).abs() <= 6.0 * se);
        prop_assert_eq!(sample, sample_counts(&d, shots, seed).unwrap());
    }
}
