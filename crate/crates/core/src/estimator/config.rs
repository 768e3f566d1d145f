use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{NetSpec, OptimizerKind, OptimizerState};
use crate::stable_dist::QuadratureConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// α = 1: least-absolute-deviation drift, closed-form diffusion.
    Cauchy,
    /// α ∈ (0, 2) \ {1}: MSE drift, then likelihood diffusion with drift frozen.
    General,
    /// Both networks trained together on the stable likelihood.
    JointNllDiagnostic,
    /// α = 2: both networks trained together on the Gaussian likelihood.
    GaussianBaseline,
}

/// How the Cauchy path reports the diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauchyDiffusion {
    /// One estimate from all residuals (additive noise).
    Pooled,
    /// One estimate per group of records sharing x0.
    PerGroup,
    /// Per group when every group has at least `min_group` records, else pooled.
    Auto,
}

/// Optimizer and schedule of one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub epochs: usize,
    /// `None` trains on the full data set in every step.
    pub batch_size: Option<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle: bool,
    /// Learning rate at the last epoch relative to the first; the rate
    /// decays geometrically in between. 1 keeps it constant.
    #[serde(default = "unit")]
    pub final_lr_fraction: f64,
}

fn unit() -> f64 {
    1.0
}

impl StageConfig {
    pub fn adam(learning_rate: f64, epochs: usize, batch_size: Option<usize>) -> Self {
        Self {
            epochs,
            batch_size,
            optimizer: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle: true,
            final_lr_fraction: 1.0,
        }
    }

    pub fn adamax(learning_rate: f64, epochs: usize, batch_size: Option<usize>) -> Self {
        Self {
            optimizer: OptimizerKind::Adamax,
            ..Self::adam(learning_rate, epochs, batch_size)
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_decay(mut self, final_lr_fraction: f64) -> Self {
        self.final_lr_fraction = final_lr_fraction;
        self
    }

    /// Learning rate used during `epoch` (1-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.learning_rate;
        }
        let t = (epoch.saturating_sub(1)) as f64 / (self.epochs - 1) as f64;
        self.learning_rate * self.final_lr_fraction.powf(t)
    }

    pub fn optimizer_state(&self) -> OptimizerState {
        OptimizerState::new(self.optimizer, self.learning_rate, self.beta1, self.beta2, self.epsilon)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config(format!("{name}: epochs must be positive")));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config(format!("{name}: batch_size must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(Error::config(format!(
                "{name}: learning_rate and epsilon must be positive"
            )));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::config(format!("{name}: final_lr_fraction must lie in (0, 1]")));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::config(format!("{name}: betas must lie in [0, 1)")));
        }
        Ok(())
    }
}

/// Everything that controls a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub alpha: f64,
    pub mode: FitMode,
    pub drift_net: NetSpec,
    pub diffusion_net: NetSpec,
    pub drift_stage: StageConfig,
    pub diffusion_stage: StageConfig,
    pub use_mid20_trick: bool,
    pub cauchy_diffusion: CauchyDiffusion,
    /// Smallest group that counts as a group for the Cauchy `auto` rule.
    pub min_group: usize,
    /// Evaluation grid size per axis for the report.
    pub grid_points: usize,
    /// Explicit evaluation points; overrides `grid_points` when present.
    #[serde(default)]
    pub eval_grid: Option<Vec<Vec<f64>>>,
    /// Joint diagnostic only: hold the diffusion at the true coefficient.
    pub freeze_diffusion_at_truth: bool,
    pub quadrature: QuadratureConfig,
    pub seed: u64,
}

impl FitConfig {
    fn base(alpha: f64, mode: FitMode) -> Self {
        Self {
            alpha,
            mode,
            drift_net: NetSpec::drift(3),
            diffusion_net: NetSpec::diffusion(),
            drift_stage: StageConfig::adam(0.005, 300, None),
            diffusion_stage: StageConfig::adamax(0.005, 30, Some(512)).with_epsilon(1e-7),
            use_mid20_trick: true,
            cauchy_diffusion: CauchyDiffusion::Auto,
            min_group: 10,
            grid_points: 41,
            eval_grid: None,
            freeze_diffusion_at_truth: false,
            quadrature: QuadratureConfig::default(),
            seed: 0,
        }
    }

    /// α = 1 defaults: 2×25 drift net, batch 100, 100 epochs, AdaMax lr 0.002.
    pub fn cauchy() -> Self {
        Self {
            drift_net: NetSpec::drift(2),
            drift_stage: StageConfig::adamax(0.002, 100, Some(100)),
            use_mid20_trick: false,
            ..Self::base(1.0, FitMode::Cauchy)
        }
    }

    /// Two-step defaults: 3×25 drift net with Adam lr 0.005 for 300 epochs,
    /// 2×25 softplus diffusion net with AdaMax lr 0.005, ε 1e-7, batch 512,
    /// 30 epochs.
    pub fn general(alpha: f64) -> Self {
        Self::base(alpha, FitMode::General)
    }

    /// Both networks on the stable likelihood, batch 512 for 30 epochs.
    pub fn joint_nll(alpha: f64) -> Self {
        Self {
            drift_stage: StageConfig::adam(0.005, 30, Some(512)),
            use_mid20_trick: false,
            ..Self::base(alpha, FitMode::JointNllDiagnostic)
        }
    }

    pub fn gaussian() -> Self {
        Self {
            drift_stage: StageConfig::adam(0.005, 30, Some(512)),
            use_mid20_trick: false,
            ..Self::base(2.0, FitMode::GaussianBaseline)
        }
    }

    pub fn for_alpha(alpha: f64) -> Self {
        if alpha == 1.0 {
            Self::cauchy()
        } else if alpha == 2.0 {
            Self::gaussian()
        } else {
            Self::general(alpha)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::config(format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        match self.mode {
            FitMode::Cauchy if self.alpha != 1.0 => return Err(Error::config("cauchy mode requires alpha = 1")),
            FitMode::GaussianBaseline if self.alpha != 2.0 => {
                return Err(Error::config("gaussian_baseline mode requires alpha = 2"))
            }
            FitMode::General | FitMode::JointNllDiagnostic if self.alpha == 1.0 || self.alpha == 2.0 => {
                return Err(Error::config(format!(
                    "{:?} mode requires alpha in (0, 2) other than 1",
                    self.mode
                )))
            }
            _ => {}
        }
        self.drift_stage.validate("drift_stage")?;
        self.diffusion_stage.validate("diffusion_stage")?;
        self.quadrature.validate()?;
        if self.grid_points == 0 || self.eval_grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(Error::config("grid_points must be positive"));
        }
        if self.diffusion_net.output_floor < 0.0 {
            return Err(Error::config("diffusion output floor must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_alpha_consistency() {
        assert!(FitConfig::cauchy().validate().is_ok());
        assert!(FitConfig::general(1.5).validate().is_ok());
        assert!(FitConfig::gaussian().validate().is_ok());
        assert!(FitConfig::general(1.0).validate().is_err());
        let mut c = FitConfig::cauchy();
        c.alpha = 1.5;
        assert!(c.validate().is_err());
        let mut g = FitConfig::gaussian();
        g.alpha = 1.9;
        assert!(g.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = FitConfig::general(0.5).with_seed(4);
        let s = serde_json::to_string(&c).unwrap();
        let back: FitConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
