use eigenprism::estimators::{eigenprism_estimate, snr_interval, two_step_interval, EigenPrismOptions, Estimand, Target};
use eigenprism::model::{split_sample, standardize_columns, Dataset};
use eigenprism::sim::{run_trials, SimulationScenario};
use eigenprism::special::z_critical;
use eigenprism::spectrum::spectral_decompose;
use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn dataset(seed: u64, n: usize, p: usize, signal: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Mat::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta: Vec<f64> = (0..p).map(|_| signal * rng.sample::<f64, _>(StandardNormal) / (p as f64).sqrt()).collect();
    let y = (0..n).map(|i| (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal)).collect();
    Dataset::new(x, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn decomposition_preserves_trace_and_norm(seed in 0u64..10_000, n in 1usize..25, extra in 0usize..40) {
        let p = n + extra;
        let d = dataset(seed, n, p, 1.0);
        let s = spectral_decompose(&d).unwrap();
        let fro: f64 = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| d.x()[(i, j)].powi(2)).sum();
        let lam: f64 = s.lambda().iter().sum();
        let ysq: f64 = d.y().iter().map(|v| v * v).sum();
        let zsq: f64 = s.z().iter().map(|v| v * v).sum();
        prop_assert!((lam - fro / p as f64).abs() <= 1e-10 * lam.max(1.0));
        prop_assert!((zsq - ysq).abs() <= 1e-10 * ysq.max(1e-300));
        prop_assert!(s.lambda().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn standardize_is_idempotent(seed in 0u64..10_000, n in 3usize..30, p in 1usize..10) {
        let once = standardize_columns(&dataset(seed, n, p, 1.0)).unwrap();
        let twice = standardize_columns(&once).unwrap();
        for i in 0..n {
            for j in 0..p {
                prop_assert!((once.x()[(i, j)] - twice.x()[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn split_partitions_rows(seed in 0u64..10_000, n in 2usize..40, f in 0.05f64..0.95) {
        let d = dataset(seed, n, 3, 1.0);
        match split_sample(&d, f, seed) {
            Ok((a, b)) => {
                prop_assert_eq!(a.n() + b.n(), n);
                prop_assert_eq!(a.n(), ((f * n as f64) + 0.5).floor() as usize);
                let mut ys: Vec<f64> = a.y().iter().chain(b.y()).copied().collect();
                let mut orig = d.y().to_vec();
                ys.sort_by(f64::total_cmp);
                orig.sort_by(f64::total_cmp);
                prop_assert_eq!(ys, orig);
            }
            Err(e) => prop_assert_eq!(e.category(), "EmptySplit"),
        }
    }

    #[test]
    fn interval_invariants(seed in 0u64..10_000, n in 4usize..30, extra in 0usize..60, signal in 0.0f64..5.0,
                           alpha in 0.01f64..0.3, two_step in any::<bool>()) {
        let d = dataset(seed, n, n + extra, signal);
        let spec = spectral_decompose(&d).unwrap();
        let opts = EigenPrismOptions { alpha, two_step, ..Default::default() };
        let z = z_critical(alpha).unwrap();
        for target in [Target::ThetaSquared, Target::SigmaSquared] {
            let e = if two_step { two_step_interval(&spec, target, &opts) } else { eigenprism_estimate(&spec, target, &opts) };
            let e = e.unwrap();
            prop_assert!(0.0 <= e.lower && e.lower <= e.point && e.point <= e.upper);
            prop_assert!(e.sd_bound >= 0.0);
            if !e.clipped_lower && !e.clipped_upper {
                prop_assert!((e.width() - 2.0 * z * e.sd_bound).abs() <= 1e-9 * e.width().max(1e-12));
            }
        }
        let s = snr_interval(&spec, &opts).unwrap();
        prop_assert!(0.0 <= s.lower && s.lower <= s.point && s.point <= s.upper && s.upper <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn harness_is_deterministic(seed in 0u64..1000, threads in 2usize..4) {
        let s = SimulationScenario::new(12, 30, 1.0, 1.0, Estimand::ThetaSquared, 16, seed);
        let serial = run_trials(&s, Some(1)).unwrap();
        prop_assert_eq!(&serial, &run_trials(&s, Some(1)).unwrap());
        prop_assert_eq!(&serial, &run_trials(&s, Some(threads)).unwrap());
    }
}
