//! Backprop against central finite differences on the network shapes used by
//! the experiments, directly and through the training losses.

use levy_sde::estimator::{
    drift_lad_batch, drift_mse_batch, drift_residuals, joint_nll_batch, nll_batch, JointDiffusion,
};
use levy_sde::neural::{Mlp, NetSpec};
use levy_sde::sde_sim::{builtin_system, generate_snapshots, uniform_grid, SnapshotDataset};
use levy_sde::stable_dist::{QuadratureConfig, StandardDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PROBES: usize = 100;
const TOL: f64 = 1e-5;
// Gradients smaller than this are compared absolutely; the loss values are
// O(1), so this sits well above the difference quotient's rounding noise.
const SCALE_FLOOR: f64 = 1e-6;

/// Fourth-order central difference (two Richardson-combined quotients).
fn central_difference<F: FnMut(&[f64]) -> f64>(params: &[f64], j: usize, step: f64, mut loss: F) -> f64 {
    let mut p = params.to_vec();
    let mut at = |delta: f64| {
        p[j] = params[j] + delta;
        loss(&p)
    };
    let d1 = (at(step) - at(-step)) / (2.0 * step);
    let d2 = (at(2.0 * step) - at(-2.0 * step)) / (4.0 * step);
    (4.0 * d1 - d2) / 3.0
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(SCALE_FLOOR)
}

fn with_params(net: &Mlp, params: &[f64]) -> Mlp {
    let mut n = net.clone();
    n.params_mut().copy_from_slice(params);
    n
}

fn architectures() -> Vec<(&'static str, NetSpec, usize)> {
    vec![
        ("drift 2x25", NetSpec::drift(2), 1),
        ("drift 3x25", NetSpec::drift(3), 1),
        ("diffusion 2x25", NetSpec::diffusion(), 1),
        ("drift 3x25 2-D", NetSpec::drift(3), 2),
        ("diffusion 2x25 2-D", NetSpec::diffusion(), 2),
    ]
}

#[test]
fn network_output_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (name, spec, dim) in architectures() {
        let net = spec.build(dim, dim, 17).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..PROBES {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let up: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let j = rng.random_range(0..net.param_count());
            let analytic = net.backward(&x, &up).unwrap().params[j];
            let numeric = central_difference(net.params(), j, 1e-4, |p| {
                let out = with_params(&net, p).forward(&x).unwrap();
                out.iter().zip(&up).map(|(a, b)| a * b).sum()
            });
            worst = worst.max(rel_err(analytic, numeric));
        }
        println!("{name}: max relative error {worst:.2e}");
        assert!(worst <= TOL, "{name}: {worst}");
    }
}

fn small_dataset(system: &str, alpha: f64, per_axis: usize, reps: usize) -> SnapshotDataset {
    let sys = builtin_system(system).unwrap();
    let pts = uniform_grid(&sys.domain, per_axis);
    generate_snapshots(&sys, alpha, &pts, reps, 0.1, 5).unwrap()
}

fn check_batch_loss<F>(name: &str, net: &Mlp, mut batch: F)
where
    F: FnMut(&Mlp) -> (f64, Vec<f64>),
{
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (_, grad) = batch(net);
    let mut worst = 0.0f64;
    for _ in 0..PROBES {
        let j = rng.random_range(0..net.param_count());
        let numeric = central_difference(net.params(), j, 1e-4, |p| batch(&with_params(net, p)).0);
        worst = worst.max(rel_err(grad[j], numeric));
    }
    println!("{name}: max relative error {worst:.2e}");
    assert!(worst <= TOL, "{name}: {worst}");
}

#[test]
fn drift_loss_gradients() {
    for (system, dim) in [("ou_add", 1), ("coupled_linear_2d", 2)] {
        let ds = small_dataset(system, 1.5, 4, 5);
        let idx: Vec<usize> = (0..ds.len()).collect();
        for layers in [2, 3] {
            let net = NetSpec::drift(layers).build(dim, dim, 3).unwrap();
            check_batch_loss(&format!("mse {system} {layers}x25"), &net, |n| {
                drift_mse_batch(&ds, &idx, n).unwrap()
            });
        }
    }
    // the absolute loss is smooth away from zero residuals, which these
    // noisy records never hit
    let ds = small_dataset("cauchy_square_add", 1.0, 6, 3);
    let idx: Vec<usize> = (0..ds.len()).collect();
    let net = NetSpec::drift(2).build(1, 1, 3).unwrap();
    check_batch_loss("lad 2x25", &net, |n| drift_lad_batch(&ds, &idx, n).unwrap());
}

#[test]
fn stable_nll_gradients_through_quadrature_density() {
    let cfg = QuadratureConfig::default();
    for (alpha, system, dim) in [
        (1.5, "double_well_linear_mult", 1),
        (0.5, "ou_linear_mult", 1),
        (1.5, "maier_stein", 2),
    ] {
        let ds = small_dataset(system, alpha, 4, 5);
        let idx: Vec<usize> = (0..ds.len()).collect();
        let density = StandardDensity::new(alpha, &cfg).unwrap();
        let f_hat = NetSpec::drift(3).build(dim, dim, 1).unwrap();
        let residuals = drift_residuals(&ds, &f_hat);
        let g_net = NetSpec::diffusion().build(dim, dim, 2).unwrap();
        check_batch_loss(&format!("nll alpha {alpha} {system}"), &g_net, |n| {
            nll_batch(&ds, &idx, &residuals, n, &density, alpha).unwrap()
        });
        // drift side of the joint objective
        check_batch_loss(&format!("joint nll drift alpha {alpha} {system}"), &f_hat, |n| {
            let (l, fg, _) = joint_nll_batch(&ds, &idx, n, JointDiffusion::Net(&g_net), &density, alpha).unwrap();
            (l, fg)
        });
    }
}
