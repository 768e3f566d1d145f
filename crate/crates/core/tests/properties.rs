use std::sync::OnceLock;

use levy_sde::estimator::{central_band, central_mean, fit_two_step, FitConfig, StageConfig};
use levy_sde::neural::NetSpec;
use levy_sde::sde_sim::{em_step, generate_snapshots, NoiseDraw, SystemSpec};
use levy_sde::stable_dist::{char_fn, QuadratureConfig, StableParams, ZolotarevKernel};
use proptest::prelude::*;

const ALPHAS: [f64; 6] = [0.3, 0.5, 0.8, 1.2, 1.5, 1.9];

fn kernels() -> &'static Vec<ZolotarevKernel> {
    static K: OnceLock<Vec<ZolotarevKernel>> = OnceLock::new();
    K.get_or_init(|| {
        ALPHAS
            .iter()
            .map(|&a| ZolotarevKernel::new(a, &QuadratureConfig::default()).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn density_is_even_and_positive(k in 0usize..6, x in -1e4f64..1e4) {
        let kern = &kernels()[k];
        let p = kern.pdf(x);
        prop_assert_eq!(p, kern.pdf(-x));
        prop_assert!(p > 0.0 && p.is_finite());
        prop_assert!(p <= kern.pdf(0.0));
    }

    #[test]
    fn symmetric_char_fn_is_real_and_even(
        alpha in 0.05f64..2.0,
        sigma in 0.1f64..3.0,
        t in -20.0f64..20.0,
    ) {
        let params = StableParams::symmetric(alpha, sigma, 0.0).unwrap();
        let phi = char_fn(t, &params);
        let want = (-(sigma * t.abs()).powf(alpha)).exp();
        prop_assert!(phi.im.abs() <= 1e-14);
        prop_assert!((phi.re - want).abs() <= 1e-14);
        prop_assert_eq!(phi, char_fn(-t, &params));
    }

    #[test]
    fn shifted_char_fn_has_linear_phase(
        alpha in 0.05f64..2.0,
        gamma in -3.0f64..3.0,
        t in -10.0f64..10.0,
    ) {
        let phi = char_fn(t, &StableParams::symmetric(alpha, 1.0, gamma).unwrap());
        let mag = (-t.abs().powf(alpha)).exp();
        prop_assert!((phi.re - mag * (gamma * t).cos()).abs() <= 1e-14);
        prop_assert!((phi.im - mag * (gamma * t).sin()).abs() <= 1e-14);
    }

    #[test]
    fn euler_step_is_linear_in_noise(
        x in -3.0f64..3.0,
        c in 0.0f64..5.0,
        h in 1e-3f64..1.0,
        w in -100.0f64..100.0,
    ) {
        let sys = SystemSpec::scalar("linear_probe", -3.0, 3.0, |x| x.sin() - x * x, move |_| c);
        let noisy = em_step(&[x], &sys, h, &NoiseDraw(vec![w])).unwrap();
        let quiet = em_step(&[x], &sys, h, &NoiseDraw(vec![0.0])).unwrap();
        prop_assert_eq!(noisy[0], quiet[0] + c * w);
    }

    #[test]
    fn snapshot_groups_partition_records(
        n_points in 1usize..12,
        reps in 1usize..20,
        alpha in prop::sample::select(vec![0.5, 1.0, 1.5, 2.0]),
        seed in any::<u64>(),
    ) {
        let sys = SystemSpec::scalar("probe", -1.0, 1.0, |x| -x, |x| 1.0 + x * x);
        let pts: Vec<Vec<f64>> = (0..n_points).map(|i| vec![i as f64 / 7.0 - 0.5]).collect();
        let ds = generate_snapshots(&sys, alpha, &pts, reps, 0.05, seed).unwrap();
        let groups = ds.groups().unwrap();
        prop_assert_eq!(groups.len(), n_points);
        let mut next = 0;
        for g in &groups {
            prop_assert_eq!(g.start, next);
            prop_assert_eq!(g.len(), reps);
            next = g.end;
            for i in g.clone() {
                prop_assert_eq!(ds.x0(i), ds.x0(g.start));
                prop_assert_eq!(ds.h(i), ds.h(g.start));
            }
        }
        prop_assert_eq!(next, ds.len());
    }

    #[test]
    fn central_mean_lies_in_band(values in prop::collection::vec(-1e6f64..1e6, 5..400)) {
        let n = values.len();
        let (lo, hi) = central_band(n);
        prop_assert!(1 <= lo && lo <= hi && hi <= n);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let m = central_mean(&mut values.clone());
        prop_assert!(m >= sorted[lo - 1] - 1e-9 && m <= sorted[hi - 1] + 1e-9);
        // order does not matter and one wild outlier cannot move it past the band
        let mut reversed: Vec<f64> = values.iter().rev().copied().collect();
        prop_assert_eq!(central_mean(&mut reversed), m);
        let mut spiked = values.clone();
        spiked[0] = 1e300;
        let ms = central_mean(&mut spiked);
        prop_assert!(ms <= sorted[hi.min(n - 1)] + 1e-9);
    }

    #[test]
    fn floored_softplus_outputs_stay_positive(
        seed in any::<u64>(),
        x in prop::collection::vec(-1e3f64..1e3, 2),
        shift in -1e3f64..0.0,
    ) {
        let mut net = NetSpec::diffusion().build(2, 2, seed).unwrap();
        // drive the output biases far negative so the floor engages
        let n = net.param_count();
        for b in &mut net.params_mut()[n - 2..] {
            *b += shift;
        }
        for v in net.forward(&x).unwrap() {
            prop_assert!(v >= 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn diffusion_stage_never_touches_drift(seed in any::<u64>(), alpha in prop::sample::select(vec![0.5, 1.5])) {
        let sys = levy_sde::sde_sim::builtin_system("double_well_linear_mult").unwrap();
        let pts = levy_sde::sde_sim::uniform_grid(&sys.domain, 6);
        let ds = generate_snapshots(&sys, alpha, &pts, 50, 0.5, seed).unwrap();
        let mut cfg = FitConfig::general(alpha).with_seed(seed);
        cfg.drift_stage = StageConfig::adam(0.005, 20, None);
        cfg.diffusion_stage = StageConfig::adamax(0.005, 2, Some(64)).with_epsilon(1e-7);
        let out = fit_two_step(&ds, &cfg, Some(&sys)).unwrap();
        prop_assert_eq!(
            &out.report.drift_checksum_after_drift_stage,
            &out.report.drift_checksum_final
        );
        for row in &out.report.diffusion_eval {
            prop_assert!(row.iter().all(|&v| v >= 1e-13));
        }
    }
}
