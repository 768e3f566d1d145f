//! Symmetric α-stable laws: parameters, densities, characteristic
//! function and sampling.
//!
//! The workhorse is [`ZolotarevKernel`], an integral representation of the
//! standard symmetric density evaluated with a precomputed node set so that
//! repeated evaluations at a fixed α are cheap. [`pdf_fourier`] and
//! [`pdf_series`] are independent numerical routes kept as cross-checks.

mod fourier;
mod sampling;
mod series;
mod zolotarev;

pub use fourier::pdf_fourier;
pub use sampling::{cms_transform, sample_standard, StableSampler};
pub use series::{pdf_series, SeriesValue};
pub use zolotarev::{pdf_zolotarev, tail_mass, ZolotarevKernel};

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Parameters (α, β, σ, γ) of the stable law S_α(σ, β, γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must lie in [-1, 1], got {beta}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !gamma.is_finite() {
            return Err(Error::domain("gamma must be finite"));
        }
        Ok(Self {
            alpha,
            beta,
            sigma,
            gamma,
        })
    }

    /// S_α(1, 0, 0).
    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0, 1.0, 0.0)
    }

    pub fn symmetric(alpha: f64, sigma: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha, 0.0, sigma, gamma)
    }

    pub(crate) fn require_symmetric(&self) -> Result<()> {
        if self.beta != 0.0 {
            return Err(Error::domain(format!(
                "only symmetric laws (beta = 0) are supported here, got beta = {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Location parameter γ₀ of the same law in Nolan's S⁰ parameterization.
    pub fn nolan_s0_location(&self) -> f64 {
        if self.alpha == 1.0 {
            self.gamma + self.beta * self.sigma * FRAC_2_PI * self.sigma.ln()
        } else {
            self.gamma + self.beta * self.sigma * (PI * self.alpha / 2.0).tan()
        }
    }
}

/// Numerical controls for the density routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Node spacing of the Zolotarev rule in the stretched log-V variable.
    pub node_spacing: f64,
    /// Weight of the angle in the stretched variable (nodes per radian bound).
    pub angular_weight: f64,
    /// Offset kept from the singular endpoints θ ∈ {0, π/2}.
    pub endpoint_shrink: f64,
    /// Absolute tolerance for the Fourier inversion integral.
    pub fourier_tol: f64,
    /// Upper limit of the Fourier integral; `None` picks T with e^{-T^α} < 1e-16.
    pub fourier_cutoff: Option<f64>,
    /// Maximum number of terms for the series representation.
    pub series_terms: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            node_spacing: 0.3,
            angular_weight: 20.0,
            endpoint_shrink: 1e-8,
            fourier_tol: 1e-10,
            fourier_cutoff: None,
            series_terms: 120,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.node_spacing > 0.0 && self.node_spacing <= 1.0) {
            return Err(Error::config("node_spacing must lie in (0, 1]"));
        }
        if !(self.angular_weight >= 1.0) {
            return Err(Error::config("angular_weight must be at least 1"));
        }
        if !(self.endpoint_shrink > 0.0 && self.endpoint_shrink <= 1e-3) {
            return Err(Error::config("endpoint_shrink must lie in (0, 1e-3]"));
        }
        if !(self.fourier_tol > 0.0) {
            return Err(Error::config("fourier_tol must be positive"));
        }
        if let Some(t) = self.fourier_cutoff {
            if !(t > 0.0) {
                return Err(Error::config("fourier_cutoff must be positive"));
            }
        }
        if self.series_terms == 0 {
            return Err(Error::config("series_terms must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn check_open_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    Ok(())
}

/// Cauchy density σ / (π[(x − γ)² + σ²]).
pub fn pdf_cauchy(x: f64, sigma: f64, gamma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let d = x - gamma;
    Ok(sigma / (PI * (d * d + sigma * sigma)))
}

/// Density of S_2(σ, 0, γ), a normal law with variance 2σ².
pub fn pdf_gaussian(x: f64, sigma: f64, gamma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let d = x - gamma;
    Ok((-(d * d) / (4.0 * sigma * sigma)).exp() / (4.0 * PI * sigma * sigma).sqrt())
}

/// Density of the Lévy law S_{1/2}(σ, 1, γ), supported on (γ, ∞).
pub fn pdf_levy(x: f64, sigma: f64, gamma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let d = x - gamma;
    if d <= 0.0 {
        return Ok(0.0);
    }
    Ok((sigma / (2.0 * PI)).sqrt() * d.powf(-1.5) * (-sigma / (2.0 * d)).exp())
}

/// Density of a symmetric S_α(σ, 0, γ) at `x`, i.e. (1/σ)·p_α((x − γ)/σ).
pub fn pdf_general(x: f64, params: &StableParams, cfg: &QuadratureConfig) -> Result<f64> {
    params.require_symmetric()?;
    if params.alpha == 1.0 {
        return pdf_cauchy(x, params.sigma, params.gamma);
    }
    if params.alpha == 2.0 {
        return pdf_gaussian(x, params.sigma, params.gamma);
    }
    let z = (x - params.gamma) / params.sigma;
    Ok(pdf_zolotarev(z, params.alpha, cfg)? / params.sigma)
}

/// Characteristic function E[exp(itX)] for X ~ S_α(σ, β, γ).
pub fn char_fn(t: f64, params: &StableParams) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let StableParams {
        alpha,
        beta,
        sigma,
        gamma,
    } = *params;
    let at = t.abs();
    let sign = t.signum();
    let log_phi = if alpha == 1.0 {
        Complex64::new(-sigma * at, -sigma * at * beta * sign * FRAC_2_PI * at.ln())
    } else {
        let mag = sigma.powf(alpha) * at.powf(alpha);
        Complex64::new(-mag, mag * beta * sign * (PI * alpha / 2.0).tan())
    } + Complex64::new(0.0, gamma * t);
    log_phi.exp()
}

/// Parameters of kX + a when X ~ `params`.
pub fn scale_shift_params(params: &StableParams, k: f64, a: f64) -> Result<StableParams> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::domain("scale factor k must be finite and non-zero"));
    }
    let sigma = k.abs() * params.sigma;
    let beta = k.signum() * params.beta;
    let mut gamma = k * params.gamma;
    if params.alpha == 1.0 {
        gamma -= FRAC_2_PI * k * k.abs().ln() * params.sigma * params.beta;
    }
    StableParams::new(params.alpha, beta, sigma, gamma + a)
}

/// Intensity constant C(1, α) of the one-dimensional symmetric jump measure.
pub fn levy_intensity_constant(alpha: f64) -> Result<f64> {
    check_open_alpha(alpha)?;
    Ok(alpha * gamma((1.0 + alpha) / 2.0) / (2f64.powf(1.0 - alpha) * PI.sqrt() * gamma(1.0 - alpha / 2.0)))
}

/// p_α(0) = Γ(1 + 1/α)/π for the standard symmetric law.
pub fn density_at_zero(alpha: f64) -> f64 {
    gamma(1.0 + 1.0 / alpha) / PI
}

/// Density and score (d/dx log p) of the standard symmetric law, with the
/// α = 1 and α = 2 closed forms dispatched.
#[derive(Debug, Clone)]
pub enum StandardDensity {
    Cauchy,
    Gaussian,
    Zolotarev(ZolotarevKernel),
}

impl StandardDensity {
    pub fn new(alpha: f64, cfg: &QuadratureConfig) -> Result<Self> {
        if alpha == 1.0 {
            Ok(Self::Cauchy)
        } else if alpha == 2.0 {
            Ok(Self::Gaussian)
        } else {
            Ok(Self::Zolotarev(ZolotarevKernel::new(alpha, cfg)?))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.pdf_and_score(x).0
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Self::Cauchy => -(PI * (1.0 + x * x)).ln(),
            Self::Gaussian => -x * x / 4.0 - 0.5 * (4.0 * PI).ln(),
            Self::Zolotarev(k) => k.log_pdf_and_score(x).0,
        }
    }

    /// Returns (p(x), d/dx log p(x)).
    pub fn pdf_and_score(&self, x: f64) -> (f64, f64) {
        match self {
            Self::Cauchy => (1.0 / (PI * (1.0 + x * x)), -2.0 * x / (1.0 + x * x)),
            Self::Gaussian => ((-x * x / 4.0).exp() / (4.0 * PI).sqrt(), -x / 2.0),
            Self::Zolotarev(k) => k.pdf_and_score(x),
        }
    }

    /// Returns (log p(x), d/dx log p(x)); stays finite far in the tails.
    pub fn log_pdf_and_score(&self, x: f64) -> (f64, f64) {
        match self {
            Self::Zolotarev(k) => k.log_pdf_and_score(x),
            _ => {
                let (_, s) = self.pdf_and_score(x);
                (self.log_pdf(x), s)
            }
        }
    }
}
