use levy_sde::estimator::{
    drift_lad_batch, drift_mse_batch, fit_diffusion_nll, fit_two_step, l2_error, nll_loss, CauchyDiffusion, FitConfig,
    StageConfig,
};
use levy_sde::neural::{Activation, Mlp, NetSpec};
use levy_sde::sde_sim::{builtin_system, generate_snapshots, uniform_grid, SnapshotDataset};
use levy_sde::stable_dist::{QuadratureConfig, StandardDensity};

fn linear_net(dim: usize, weights: &[f64], bias: &[f64]) -> Mlp {
    let mut net = Mlp::new(vec![dim, dim], Activation::Elu, Activation::Identity, 0.0, 0).unwrap();
    let p = net.params_mut();
    p[..weights.len()].copy_from_slice(weights);
    p[weights.len()..].copy_from_slice(bias);
    net
}

fn row_data(system: &str, alpha: f64, per_axis: usize, reps: usize, h: f64, seed: u64) -> SnapshotDataset {
    let sys = builtin_system(system).unwrap();
    generate_snapshots(&sys, alpha, &uniform_grid(&sys.domain, per_axis), reps, h, seed).unwrap()
}

#[test]
fn two_dimensional_losses_average_or_sum_the_coordinates() {
    let ds = row_data("coupled_linear_2d", 1.5, 3, 4, 0.5, 1);
    let idx: Vec<usize> = (0..ds.len()).collect();
    let net = NetSpec::drift(2).build(2, 2, 7).unwrap();
    let (both, _) = drift_mse_batch(&ds, &idx, &net).unwrap();
    // refit each coordinate as its own 1-D problem through a diagonal net
    let mut per_dim = 0.0;
    for k in 0..2 {
        let mut one = SnapshotDataset::new(1, 1.5);
        for i in 0..ds.len() {
            // shift the target so a zero net reproduces the 2-D residual
            let pred = net.forward(ds.x0(i)).unwrap()[k];
            let x1 = ds.x1(i)[k] - ds.h(i) * pred;
            one.push(&ds.x0(i)[k..=k], &[x1], ds.h(i)).unwrap();
        }
        let zero = linear_net(1, &[0.0], &[0.0]);
        per_dim += drift_mse_batch(&one, &idx, &zero).unwrap().0;
    }
    assert!((both - per_dim / 2.0).abs() < 1e-12 * both.max(1.0));

    // the likelihood adds the coordinates
    let density = StandardDensity::new(1.5, &QuadratureConfig::default()).unwrap();
    let f_hat = linear_net(2, &[0.0; 4], &[0.0; 2]);
    let g_net = NetSpec::diffusion().build(2, 2, 3).unwrap();
    let total = nll_loss(&ds, &f_hat, &g_net, &density, 1.5).unwrap();
    // per coordinate and record: a constant softplus net equal to that
    // record's diffusion output, applied to the 1-D residual
    let mut sum = 0.0;
    let zero = linear_net(1, &[0.0], &[0.0]);
    for i in 0..ds.len() {
        let g = g_net.forward(ds.x0(i)).unwrap();
        for k in 0..2 {
            let mut constant = Mlp::new(vec![1, 1], Activation::Elu, Activation::Softplus, 1e-13, 0).unwrap();
            constant.params_mut()[0] = 0.0;
            constant.params_mut()[1] = g[k].exp_m1().ln();
            let mut single = SnapshotDataset::new(1, 1.5);
            single.push(&[0.0], &[ds.x1(i)[k] - ds.x0(i)[k]], ds.h(i)).unwrap();
            sum += nll_loss(&single, &zero, &constant, &density, 1.5).unwrap();
        }
    }
    let total_sum = total * ds.len() as f64;
    assert!(
        (total_sum - sum).abs() < 1e-9 * total_sum.abs().max(1.0),
        "{total_sum} vs {sum}"
    );
}

#[test]
fn absolute_loss_is_stationary_at_the_median() {
    let mut ds = SnapshotDataset::new(1, 1.0);
    for r in [-1.0, 0.0, 1.0] {
        ds.push(&[0.0], &[2.0 + r], 1.0).unwrap();
    }
    let idx = [0, 1, 2];
    let at = |b: f64| drift_lad_batch(&ds, &idx, &linear_net(1, &[0.0], &[b])).unwrap();
    let (l_med, g_med) = at(2.0);
    assert_eq!(g_med[1], 0.0);
    assert!(at(1.9).0 > l_med && at(2.1).0 > l_med);
    assert!(at(1.9).1[1] < 0.0 && at(2.1).1[1] > 0.0);
}

#[test]
fn ou_row_drift_error() {
    let sys = builtin_system("ou_add").unwrap();
    let ds = row_data("ou_add", 1.5, 5, 1000, 0.1, 0);
    let out = fit_two_step(&ds, &FitConfig::general(1.5), Some(&sys)).unwrap();
    let l2 = out.report.l2_f.unwrap();
    println!("ou_add 5x1000: L2 f {l2:.5}");
    assert!(l2 <= 0.02);
}

#[test]
fn cauchy_multiplicative_diffusion_error() {
    let sys = builtin_system("cauchy_ou_mult").unwrap();
    let ds = row_data("cauchy_ou_mult", 1.0, 20, 1000, 0.01, 0);
    let mut cfg = FitConfig::cauchy();
    cfg.cauchy_diffusion = CauchyDiffusion::PerGroup;
    let out = fit_two_step(&ds, &cfg, Some(&sys)).unwrap();
    let l2 = out.report.l2_g.unwrap();
    println!("cauchy_ou_mult 20x1000: L2 g {l2:.5}");
    assert!(l2 <= 0.05);
}

#[test]
fn true_drift_gives_a_better_diffusion_fit_than_zero() {
    // diffusion bounded away from zero so exact residuals stay informative
    let sys = builtin_system("cauchy_ou_mult").unwrap();
    let ds = row_data("cauchy_ou_mult", 1.5, 5, 1000, 0.1, 2);
    let stage = StageConfig::adamax(0.005, 30, Some(512)).with_epsilon(1e-7);
    let quad = QuadratureConfig::default();
    let pts = uniform_grid(&sys.domain, 41);
    let mut errors = Vec::new();
    for f_hat in [linear_net(1, &[-1.0], &[1.0]), linear_net(1, &[0.0], &[0.0])] {
        let (g, _) = fit_diffusion_nll(&ds, &f_hat, &NetSpec::diffusion(), &stage, 1.5, &quad, 0).unwrap();
        errors.push(l2_error(|x| sys.diffusion(x), |x| g.forward(x).unwrap(), &pts));
    }
    println!(
        "diffusion L2 with true drift {:.5}, zero drift {:.5}",
        errors[0], errors[1]
    );
    assert!(errors[0] < errors[1]);
}

#[test]
fn joint_fit_with_diffusion_frozen_at_truth_recovers_drift() {
    let sys = builtin_system("ou_small_noise").unwrap();
    let ds = row_data("ou_small_noise", 1.5, 20, 500, 0.1, 0);
    let mut cfg = FitConfig::joint_nll(1.5);
    cfg.freeze_diffusion_at_truth = true;
    let out = fit_two_step(&ds, &cfg, Some(&sys)).unwrap();
    let l2 = out.report.l2_f.unwrap();
    println!("frozen-diffusion joint fit: L2 f {l2:.5}");
    assert!(l2 <= 0.02);
}

#[test]
fn gaussian_baseline_on_brownian_ou() {
    let sys = builtin_system("ou_add").unwrap();
    let ds = row_data("ou_add", 2.0, 20, 500, 0.1, 0);
    let out = fit_two_step(&ds, &FitConfig::gaussian(), Some(&sys)).unwrap();
    let (lf, lg) = (out.report.l2_f.unwrap(), out.report.l2_g.unwrap());
    println!("gaussian baseline: L2 f {lf:.5}, L2 g {lg:.5}");
    assert!(lf <= 0.02 && lg <= 0.02);
}

#[test]
#[ignore = "full-scale Maier-Stein run, about ten minutes"]
fn maier_stein_full_scale() {
    let sys = builtin_system("maier_stein").unwrap();
    let ds = row_data("maier_stein", 1.5, 40, 1000, 0.5, 0);
    let out = fit_two_step(&ds, &FitConfig::general(1.5), Some(&sys)).unwrap();
    let (lf, lg) = (out.report.l2_f.unwrap(), out.report.l2_g.unwrap());
    println!("maier_stein 40x40x1000: L2 f {lf:.5}, L2 g {lg:.5}");
    assert!(lf <= 0.02 && lg <= 0.02);
}
