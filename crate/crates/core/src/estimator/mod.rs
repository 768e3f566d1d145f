//! Identification of drift and diffusion coefficients from snapshot data.
//!
//! The drift is fitted first (least absolute deviation for Cauchy noise,
//! mean squared error otherwise). The diffusion is then obtained in closed
//! form for Cauchy noise, or by a network trained on the stable negative
//! log-likelihood with the drift held fixed.

mod cauchy;
mod config;
mod losses;
mod mid20;
mod train;

use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Mlp, NetSpec};
use crate::sde_sim::{uniform_grid, SnapshotDataset, SystemSpec};
use crate::stable_dist::{QuadratureConfig, StandardDensity};

pub use cauchy::{cauchy_scale, cauchy_sigma_direct, cauchy_sigma_pooled};
pub use config::{CauchyDiffusion, FitConfig, FitMode, StageConfig};
pub use losses::{
    drift_lad_batch, drift_mse_batch, drift_residuals, gaussian_batch, gaussian_nll_term, joint_nll_batch, nll_batch,
    nll_loss, stable_nll_term, JointDiffusion, DIFFUSION_FLOOR,
};
pub use mid20::{central_band, central_mean, mid20_targets, MID20_MIN_GROUP};

use train::{run_stage, Schedule};

const DIFFUSION_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Fitted diffusion coefficient.
#[derive(Debug, Clone)]
pub enum DiffusionModel {
    Network(Mlp),
    /// One value per dimension.
    Constant(Vec<f64>),
    /// Per-group values; evaluated by linear interpolation in 1-D and by the
    /// nearest group elsewhere.
    Groups {
        x0: Vec<Vec<f64>>,
        values: Vec<Vec<f64>>,
    },
    /// The true coefficient (ablation runs).
    Known(SystemSpec),
}

impl DiffusionModel {
    /// Diffusion estimate at `x`, clipped below at [`DIFFUSION_FLOOR`].
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = match self {
            Self::Network(net) => net.forward(x)?,
            Self::Constant(v) => v.clone(),
            Self::Groups { x0, values } => interpolate_groups(x0, values, x),
            Self::Known(sys) => sys.diffusion(x),
        };
        for v in out.iter_mut() {
            *v = v.max(DIFFUSION_FLOOR);
        }
        Ok(out)
    }

    pub fn method(&self) -> &'static str {
        match self {
            Self::Network(_) => "network",
            Self::Constant(_) => "pooled",
            Self::Groups { .. } => "per_group",
            Self::Known(_) => "fixed_truth",
        }
    }
}

fn interpolate_groups(x0: &[Vec<f64>], values: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    if x.len() == 1 && x0.len() > 1 {
        // x0 is sorted by construction
        let t = x[0];
        let pos = x0.partition_point(|p| p[0] < t);
        if pos == 0 {
            return values[0].clone();
        }
        if pos == x0.len() {
            return values[pos - 1].clone();
        }
        let (a, b) = (x0[pos - 1][0], x0[pos][0]);
        let w = if b > a { (t - a) / (b - a) } else { 0.0 };
        return values[pos - 1]
            .iter()
            .zip(&values[pos])
            .map(|(u, v)| u + w * (v - u))
            .collect();
    }
    let dist = |p: &Vec<f64>| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let best = (0..x0.len())
        .min_by(|&i, &j| dist(&x0[i]).total_cmp(&dist(&x0[j])))
        .unwrap_or(0);
    values[best].clone()
}

/// Serializable summary of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: FitMode,
    pub alpha: f64,
    pub records: usize,
    /// Distinct step sizes present in the data.
    pub h_values: Vec<f64>,
    pub grid: Vec<Vec<f64>>,
    pub drift_eval: Vec<Vec<f64>>,
    pub diffusion_eval: Vec<Vec<f64>>,
    pub l2_f: Option<f64>,
    pub l2_g: Option<f64>,
    pub l2_f_per_dim: Option<Vec<f64>>,
    pub l2_g_per_dim: Option<Vec<f64>>,
    pub drift_loss: Vec<f64>,
    pub diffusion_loss: Vec<f64>,
    pub diffusion_method: String,
    /// Cauchy mode: the pooled estimate, reported even when per-group values
    /// are used.
    pub pooled_diffusion: Option<Vec<f64>>,
    /// Hash of the drift parameters after the drift stage and at the end.
    pub drift_checksum_after_drift_stage: String,
    pub drift_checksum_final: String,
    pub notes: Vec<String>,
    pub config: FitConfig,
}

impl FitReport {
    /// Grid evaluations of f̂ as CSV: x columns then f̂ columns.
    pub fn drift_csv(&self) -> String {
        grid_csv(&self.grid, &self.drift_eval, "f_hat")
    }

    pub fn diffusion_csv(&self) -> String {
        grid_csv(&self.grid, &self.diffusion_eval, "g_hat")
    }
}

fn grid_csv(grid: &[Vec<f64>], values: &[Vec<f64>], name: &str) -> String {
    let d = grid.first().map_or(0, Vec::len);
    let m = values.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    header.extend((0..m).map(|k| format!("{name}{k}")));
    let mut s = header.join(",");
    s.push('\n');
    for (x, v) in grid.iter().zip(values) {
        let row: Vec<String> = x.iter().chain(v).map(|t| format!("{t:?}")).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

/// Report plus the fitted models.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub report: FitReport,
    pub drift: Mlp,
    pub diffusion: DiffusionModel,
}

/// Mean squared difference between two vector fields over `points`,
/// averaged over dimensions.
pub fn l2_error<T, F>(truth: T, fitted: F, points: &[Vec<f64>]) -> f64
where
    T: Fn(&[f64]) -> Vec<f64>,
    F: Fn(&[f64]) -> Vec<f64>,
{
    let per_dim = l2_per_dim(&truth, &fitted, points.iter().map(Vec::as_slice));
    per_dim.iter().sum::<f64>() / per_dim.len().max(1) as f64
}

fn l2_per_dim<'a, T, F>(truth: &T, fitted: &F, points: impl Iterator<Item = &'a [f64]>) -> Vec<f64>
where
    T: Fn(&[f64]) -> Vec<f64>,
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut sums: Vec<f64> = Vec::new();
    let mut n = 0usize;
    let mut cached: Option<(&[f64], Vec<f64>)> = None;
    for p in points {
        let diff = match &cached {
            Some((q, diff)) if *q == p => diff.clone(),
            _ => {
                let a = truth(p);
                let b = fitted(p);
                let diff: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).collect();
                cached = Some((p, diff.clone()));
                diff
            }
        };
        if sums.is_empty() {
            sums = vec![0.0; diff.len()];
        }
        for (s, v) in sums.iter_mut().zip(&diff) {
            *s += v;
        }
        n += 1;
    }
    sums.iter().map(|s| s / n.max(1) as f64).collect()
}

fn checksum(net: &Mlp) -> String {
    let mut hasher = DefaultHasher::new();
    for p in net.params() {
        p.to_bits().hash(&mut hasher);
    }
    format!("{:016x}", hasher.finish())
}

fn check_truth(ds: &SnapshotDataset, truth: Option<&SystemSpec>) -> Result<()> {
    if let Some(sys) = truth {
        if sys.dim != ds.dim() {
            return Err(Error::DimensionMismatch {
                expected: ds.dim(),
                got: sys.dim,
            });
        }
    }
    if ds.is_empty() {
        return Err(Error::config("dataset is empty"));
    }
    Ok(())
}

/// Trains a drift network on the squared one-step prediction error.
pub fn fit_drift_mse(ds: &SnapshotDataset, spec: &NetSpec, stage: &StageConfig, seed: u64) -> Result<(Mlp, Vec<f64>)> {
    fit_drift(ds, spec, stage, seed, "drift_mse", drift_mse_batch)
}

/// Trains a drift network on the absolute one-step prediction error.
pub fn fit_drift_lad(ds: &SnapshotDataset, spec: &NetSpec, stage: &StageConfig, seed: u64) -> Result<(Mlp, Vec<f64>)> {
    fit_drift(ds, spec, stage, seed, "drift_lad", drift_lad_batch)
}

fn fit_drift(
    ds: &SnapshotDataset,
    spec: &NetSpec,
    stage: &StageConfig,
    seed: u64,
    name: &str,
    batch: fn(&SnapshotDataset, &[usize], &Mlp) -> Result<(f64, Vec<f64>)>,
) -> Result<(Mlp, Vec<f64>)> {
    stage.validate(name)?;
    let mut net = spec.build(ds.dim(), ds.dim(), seed)?;
    let schedule = Schedule::from_stage(name, stage, ds.len(), seed, 1);
    let mut opts = [stage.optimizer_state()];
    let curve = run_stage(&schedule, &mut [&mut net], &mut opts, |idx, nets| {
        let (loss, grad) = batch(ds, idx, nets[0])?;
        Ok((loss, vec![grad]))
    })?;
    Ok((net, curve))
}

/// Trains a diffusion network on the stable negative log-likelihood of the
/// residuals left by the frozen drift `f_hat`.
pub fn fit_diffusion_nll(
    ds: &SnapshotDataset,
    f_hat: &Mlp,
    spec: &NetSpec,
    stage: &StageConfig,
    alpha: f64,
    quadrature: &QuadratureConfig,
    seed: u64,
) -> Result<(Mlp, Vec<f64>)> {
    stage.validate("diffusion_nll")?;
    if f_hat.input_dim() != ds.dim() || f_hat.output_dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            got: f_hat.output_dim(),
        });
    }
    let density = StandardDensity::new(alpha, quadrature)?;
    let residuals = drift_residuals(ds, f_hat);
    let mut net = spec.build(ds.dim(), ds.dim(), seed ^ DIFFUSION_SEED_SALT)?;
    let schedule = Schedule::from_stage("diffusion_nll", stage, ds.len(), seed, 2);
    let mut opts = [stage.optimizer_state()];
    let curve = run_stage(&schedule, &mut [&mut net], &mut opts, |idx, nets| {
        let (loss, grad) = nll_batch(ds, idx, &residuals, nets[0], &density, alpha)?;
        Ok((loss, vec![grad]))
    })?;
    Ok((net, curve))
}

fn eval_grid(ds: &SnapshotDataset, cfg: &FitConfig) -> Vec<Vec<f64>> {
    if let Some(grid) = &cfg.eval_grid {
        return grid.clone();
    }
    let d = ds.dim();
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for i in 0..ds.len() {
        for (b, &v) in bounds.iter_mut().zip(ds.x0(i)) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    uniform_grid(&bounds, cfg.grid_points)
}

fn h_values(ds: &SnapshotDataset) -> Vec<f64> {
    let mut hs: Vec<f64> = (0..ds.len()).map(|i| ds.h(i)).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    hs
}

struct Stages {
    drift: Mlp,
    diffusion: DiffusionModel,
    drift_loss: Vec<f64>,
    diffusion_loss: Vec<f64>,
    checksum_after_drift: String,
    pooled: Option<Vec<f64>>,
    notes: Vec<String>,
}

fn build_report(
    ds: &SnapshotDataset,
    cfg: &FitConfig,
    truth: Option<&SystemSpec>,
    stages: Stages,
) -> Result<FitOutcome> {
    let grid = eval_grid(ds, cfg);
    let drift_eval = grid
        .iter()
        .map(|x| stages.drift.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let diffusion_eval = grid
        .iter()
        .map(|x| stages.diffusion.eval(x))
        .collect::<Result<Vec<_>>>()?;
    let (mut l2_f, mut l2_g, mut l2_f_per_dim, mut l2_g_per_dim) = (None, None, None, None);
    if let Some(sys) = truth {
        let points = || (0..ds.len()).map(|i| ds.x0(i));
        let drift_fit = |x: &[f64]| stages.drift.forward(x).unwrap_or_default();
        let diffusion_fit = |x: &[f64]| stages.diffusion.eval(x).unwrap_or_default();
        let f_dims = l2_per_dim(&|x: &[f64]| sys.drift(x), &drift_fit, points());
        let g_dims = l2_per_dim(&|x: &[f64]| sys.diffusion(x), &diffusion_fit, points());
        l2_f = Some(f_dims.iter().sum::<f64>() / f_dims.len() as f64);
        l2_g = Some(g_dims.iter().sum::<f64>() / g_dims.len() as f64);
        l2_f_per_dim = Some(f_dims);
        l2_g_per_dim = Some(g_dims);
    }
    let report = FitReport {
        mode: cfg.mode,
        alpha: cfg.alpha,
        records: ds.len(),
        h_values: h_values(ds),
        grid,
        drift_eval,
        diffusion_eval,
        l2_f,
        l2_g,
        l2_f_per_dim,
        l2_g_per_dim,
        drift_loss: stages.drift_loss,
        diffusion_loss: stages.diffusion_loss,
        diffusion_method: stages.diffusion.method().to_string(),
        pooled_diffusion: stages.pooled,
        drift_checksum_after_drift_stage: stages.checksum_after_drift,
        drift_checksum_final: checksum(&stages.drift),
        notes: stages.notes,
        config: cfg.clone(),
    };
    Ok(FitOutcome {
        report,
        drift: stages.drift,
        diffusion: stages.diffusion,
    })
}

/// Fits drift then diffusion according to `cfg.mode`; the joint and
/// Gaussian modes are forwarded to their own entry points. L² errors are
/// filled in when the true system is given.
pub fn fit_two_step(ds: &SnapshotDataset, cfg: &FitConfig, truth: Option<&SystemSpec>) -> Result<FitOutcome> {
    cfg.validate()?;
    check_truth(ds, truth)?;
    match cfg.mode {
        FitMode::Cauchy => fit_cauchy(ds, cfg, truth),
        FitMode::General => fit_general(ds, cfg, truth),
        FitMode::JointNllDiagnostic => fit_joint_nll_diagnostic(ds, cfg, truth),
        FitMode::GaussianBaseline => fit_gaussian_baseline(ds, cfg, truth),
    }
}

fn fit_cauchy(ds: &SnapshotDataset, cfg: &FitConfig, truth: Option<&SystemSpec>) -> Result<FitOutcome> {
    let (drift, drift_loss) = fit_drift_lad(ds, &cfg.drift_net, &cfg.drift_stage, cfg.seed)?;
    let checksum_after_drift = checksum(&drift);
    let pooled = cauchy_sigma_pooled(ds, &drift).ok();
    let per_group = match cfg.cauchy_diffusion {
        CauchyDiffusion::Pooled => false,
        CauchyDiffusion::PerGroup => {
            ds.groups()?;
            true
        }
        CauchyDiffusion::Auto => ds
            .groups()
            .map(|g| g.iter().all(|r| r.len() >= cfg.min_group.max(1)))
            .unwrap_or(false),
    };
    let diffusion = if per_group {
        let groups = ds.groups()?;
        let mut pairs = Vec::with_capacity(groups.len());
        for (gi, range) in groups.iter().enumerate() {
            pairs.push((ds.x0(range.start).to_vec(), cauchy_sigma_direct(ds, &drift, gi)?));
        }
        pairs.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let (x0, values) = pairs.into_iter().unzip();
        DiffusionModel::Groups { x0, values }
    } else {
        DiffusionModel::Constant(
            pooled
                .clone()
                .ok_or_else(|| Error::config("pooled Cauchy diffusion needs a single step size h"))?,
        )
    };
    build_report(
        ds,
        cfg,
        truth,
        Stages {
            drift,
            diffusion,
            drift_loss,
            diffusion_loss: Vec::new(),
            checksum_after_drift,
            pooled,
            notes: Vec::new(),
        },
    )
}

fn fit_general(ds: &SnapshotDataset, cfg: &FitConfig, truth: Option<&SystemSpec>) -> Result<FitOutcome> {
    let mut notes = Vec::new();
    let (drift, drift_loss) = if cfg.use_mid20_trick {
        let targets = mid20_targets(ds)?;
        notes.push(format!(
            "drift trained on {} central trimmed-mean targets",
            targets.len()
        ));
        fit_drift_mse(&targets, &cfg.drift_net, &cfg.drift_stage, cfg.seed)?
    } else {
        fit_drift_mse(ds, &cfg.drift_net, &cfg.drift_stage, cfg.seed)?
    };
    let checksum_after_drift = checksum(&drift);
    let (g_net, diffusion_loss) = fit_diffusion_nll(
        ds,
        &drift,
        &cfg.diffusion_net,
        &cfg.diffusion_stage,
        cfg.alpha,
        &cfg.quadrature,
        cfg.seed,
    )?;
    build_report(
        ds,
        cfg,
        truth,
        Stages {
            drift,
            diffusion: DiffusionModel::Network(g_net),
            drift_loss,
            diffusion_loss,
            checksum_after_drift,
            pooled: None,
            notes,
        },
    )
}

enum JointObjective {
    Stable(StandardDensity, f64),
    Gaussian,
}

fn fit_joint(
    ds: &SnapshotDataset,
    cfg: &FitConfig,
    truth: Option<&SystemSpec>,
    objective: JointObjective,
    name: &str,
) -> Result<FitOutcome> {
    let mut f_net = cfg.drift_net.build(ds.dim(), ds.dim(), cfg.seed)?;
    let schedule = Schedule::from_stage(name, &cfg.drift_stage, ds.len(), cfg.seed, 3);
    let batch = |idx: &[usize], f: &Mlp, g: JointDiffusion<'_>| match &objective {
        JointObjective::Stable(density, alpha) => joint_nll_batch(ds, idx, f, g, density, *alpha),
        JointObjective::Gaussian => gaussian_batch(ds, idx, f, g),
    };
    let (diffusion, curve) = if cfg.freeze_diffusion_at_truth {
        let sys = truth.ok_or_else(|| Error::config("freeze_diffusion_at_truth needs the true system"))?;
        let fixed = |x: &[f64], out: &mut [f64]| sys.diffusion_into(x, out);
        let mut opts = [cfg.drift_stage.optimizer_state()];
        let curve = run_stage(&schedule, &mut [&mut f_net], &mut opts, |idx, nets| {
            let (loss, gf, _) = batch(idx, nets[0], JointDiffusion::Fixed(&fixed))?;
            Ok((loss, vec![gf]))
        })?;
        (DiffusionModel::Known(sys.clone()), curve)
    } else {
        let mut g_net = cfg
            .diffusion_net
            .build(ds.dim(), ds.dim(), cfg.seed ^ DIFFUSION_SEED_SALT)?;
        let schedule = schedule.with_rates(vec![cfg.drift_stage.clone(), cfg.diffusion_stage.clone()]);
        let mut opts = [cfg.drift_stage.optimizer_state(), cfg.diffusion_stage.optimizer_state()];
        let curve = run_stage(&schedule, &mut [&mut f_net, &mut g_net], &mut opts, |idx, nets| {
            let (loss, gf, gg) = batch(idx, nets[0], JointDiffusion::Net(nets[1]))?;
            Ok((loss, vec![gf, gg]))
        })?;
        (DiffusionModel::Network(g_net), curve)
    };
    let sum = checksum(&f_net);
    build_report(
        ds,
        cfg,
        truth,
        Stages {
            drift: f_net,
            diffusion,
            drift_loss: curve.clone(),
            diffusion_loss: curve,
            checksum_after_drift: sum,
            pooled: None,
            notes: vec![format!("{name}: drift and diffusion trained together")],
        },
    )
}

/// Trains drift and diffusion together on the stable likelihood. Kept to
/// show why the two-step order matters.
pub fn fit_joint_nll_diagnostic(
    ds: &SnapshotDataset,
    cfg: &FitConfig,
    truth: Option<&SystemSpec>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    check_truth(ds, truth)?;
    if cfg.alpha == 1.0 || cfg.alpha == 2.0 {
        return Err(Error::config(
            "joint stable likelihood needs alpha in (0, 2) other than 1",
        ));
    }
    let density = StandardDensity::new(cfg.alpha, &cfg.quadrature)?;
    fit_joint(ds, cfg, truth, JointObjective::Stable(density, cfg.alpha), "joint_nll")
}

/// Trains drift and diffusion together on the Gaussian likelihood (α = 2
/// data, Brownian increments of variance h).
pub fn fit_gaussian_baseline(ds: &SnapshotDataset, cfg: &FitConfig, truth: Option<&SystemSpec>) -> Result<FitOutcome> {
    cfg.validate()?;
    check_truth(ds, truth)?;
    fit_joint(ds, cfg, truth, JointObjective::Gaussian, "gaussian_nll")
}
