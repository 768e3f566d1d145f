//! Random-walk Metropolis–Hastings estimation of the stability index α and
//! scale σ from i.i.d. symmetric stable samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable_dist::{pdf_fourier, QuadratureConfig, StandardDensity};

/// α values within this distance of 1 are evaluated by Fourier inversion.
pub const CAUCHY_BAND: f64 = 0.005;
const SIGMA_MIN: f64 = 1e-3;
const SIGMA_MAX: f64 = 1e3;
const TABLE_STEP: f64 = 0.05;
const TABLE_FLOOR: f64 = -25.0;
const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub proposal_std_alpha: f64,
    pub proposal_std_log_sigma: f64,
    pub init_alpha: f64,
    pub init_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            proposal_std_alpha: 0.05,
            proposal_std_log_sigma: 0.1,
            init_alpha: 1.2,
            init_sigma: 1.0,
            seed: 0,
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl McmcConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::config("need 0 <= burn_in < iterations"));
        }
        if !(self.proposal_std_alpha > 0.0 && self.proposal_std_log_sigma > 0.0) {
            return Err(Error::config("proposal standard deviations must be positive"));
        }
        if !in_support(self.init_alpha, self.init_sigma) {
            return Err(Error::config(format!(
                "initial state (alpha {}, sigma {}) outside the prior support",
                self.init_alpha, self.init_sigma
            )));
        }
        self.quadrature.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcResult {
    /// State after every iteration, burn-in included.
    pub chain: Vec<(f64, f64)>,
    pub burn_in: usize,
    pub posterior_mean_alpha: f64,
    pub posterior_sd_alpha: f64,
    pub posterior_mean_sigma: f64,
    pub acceptance_rate: f64,
    /// Set when the acceptance rate leaves (0.05, 0.8).
    pub acceptance_warning: Option<String>,
    pub histogram: Vec<HistogramBin>,
}

impl McmcResult {
    /// Trace as CSV with header `iteration,alpha,sigma`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,alpha,sigma\n");
        for (i, (a, sg)) in self.chain.iter().enumerate() {
            s.push_str(&format!("{i},{a:?},{sg:?}\n"));
        }
        s
    }
}

fn in_support(alpha: f64, sigma: f64) -> bool {
    alpha > 0.0 && alpha < 2.0 && (SIGMA_MIN..=SIGMA_MAX).contains(&sigma)
}

enum Law {
    Density(StandardDensity),
    Fourier(f64, QuadratureConfig),
}

impl Law {
    fn new(alpha: f64, cfg: &QuadratureConfig) -> Result<Self> {
        if alpha != 1.0 && (alpha - 1.0).abs() < CAUCHY_BAND {
            Ok(Self::Fourier(alpha, *cfg))
        } else {
            Ok(Self::Density(StandardDensity::new(alpha, cfg)?))
        }
    }

    /// (log p(z), d log p / d log|z|) for z ≥ 0.
    fn log_pdf_and_slope(&self, z: f64) -> Result<(f64, Option<f64>)> {
        match self {
            Self::Density(d) => {
                let (lp, score) = d.log_pdf_and_score(z);
                Ok((lp, Some(score * z)))
            }
            Self::Fourier(alpha, cfg) => Ok((pdf_fourier(z, *alpha, cfg)?.ln(), None)),
        }
    }
}

/// Σ_k log[(1/σ) p_α(x_k/σ)] with the exact density. Returns −∞ outside
/// the prior support.
pub fn mh_log_likelihood(samples: &[f64], alpha: f64, sigma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !in_support(alpha, sigma) {
        return Ok(f64::NEG_INFINITY);
    }
    let law = Law::new(alpha, cfg)?;
    let mut total = 0.0;
    for (k, &x) in samples.iter().enumerate() {
        let (lp, _) = law.log_pdf_and_slope((x / sigma).abs())?;
        if !lp.is_finite() {
            return Err(Error::numerical(format!(
                "density underflow at sample {k} (x = {x}, alpha {alpha}, sigma {sigma})"
            )));
        }
        total += lp - sigma.ln();
    }
    Ok(total)
}

/// log|x| of the samples, cached for the tabulated likelihood.
struct SampleLogs {
    logs: Vec<f64>,
    zeros: usize,
    lo: f64,
    hi: f64,
}

impl SampleLogs {
    fn new(samples: &[f64]) -> Self {
        let logs: Vec<f64> = samples.iter().filter(|x| **x != 0.0).map(|x| x.abs().ln()).collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            zeros: samples.len() - logs.len(),
            logs,
            lo,
            hi,
        }
    }

    fn count(&self) -> usize {
        self.logs.len() + self.zeros
    }
}

/// Log-likelihood from a cubic Hermite table of log p over log|z|, built
/// from the exact density for this (α, σ).
fn tabulated_log_likelihood(data: &SampleLogs, alpha: f64, sigma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !in_support(alpha, sigma) {
        return Ok(f64::NEG_INFINITY);
    }
    let law = Law::new(alpha, cfg)?;
    let ls = sigma.ln();
    let mut total = -(data.count() as f64) * ls;
    if data.zeros > 0 {
        total += data.zeros as f64 * law.log_pdf_and_slope(0.0)?.0;
    }
    if data.logs.is_empty() {
        return Ok(total);
    }
    let start = (data.lo - ls).max(TABLE_FLOOR);
    let end = (data.hi - ls).max(start);
    let n = ((end - start) / TABLE_STEP).ceil() as usize + 2;
    let mut values = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    for i in 0..n {
        let (v, s) = law.log_pdf_and_slope((start + i as f64 * TABLE_STEP).exp())?;
        values.push(v);
        slopes.push(s);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "density underflow tabulating alpha {alpha}, sigma {sigma}"
        )));
    }
    let slopes: Vec<f64> = if slopes.iter().all(Option::is_some) {
        slopes.into_iter().flatten().map(|s| s * TABLE_STEP).collect()
    } else {
        // finite-difference slopes, one-sided at the ends
        (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (values[b] - values[a]) * (1.0 / (b - a).max(1) as f64)
            })
            .collect()
    };
    for &l in &data.logs {
        let u = l - ls;
        if u < start {
            total += law.log_pdf_and_slope(u.exp())?.0;
            continue;
        }
        let pos = (u - start) / TABLE_STEP;
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        total += (2.0 * t3 - 3.0 * t2 + 1.0) * values[i]
            + (t3 - 2.0 * t2 + t) * slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * values[i + 1]
            + (t3 - t2) * slopes[i + 1];
    }
    Ok(total)
}

/// Random-walk Metropolis–Hastings on (α, log σ) with a flat prior on
/// α ∈ (0, 2) and a log-uniform prior on σ ∈ [1e-3, 1e3]. Proposals outside
/// the support are rejected.
pub fn estimate_alpha_mcmc(samples: &[f64], cfg: &McmcConfig) -> Result<McmcResult> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::config("no samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    let data = SampleLogs::new(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut alpha, mut log_sigma) = (cfg.init_alpha, cfg.init_sigma.ln());
    let mut current = tabulated_log_likelihood(&data, alpha, log_sigma.exp(), &cfg.quadrature)?;
    let mut chain = Vec::with_capacity(cfg.iterations);
    let mut accepted = 0usize;
    for _ in 0..cfg.iterations {
        let step_a: f64 = rng.sample(StandardNormal);
        let step_s: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let prop_alpha = alpha + cfg.proposal_std_alpha * step_a;
        let prop_log_sigma = log_sigma + cfg.proposal_std_log_sigma * step_s;
        if in_support(prop_alpha, prop_log_sigma.exp()) {
            let proposed = tabulated_log_likelihood(&data, prop_alpha, prop_log_sigma.exp(), &cfg.quadrature)?;
            if u.ln() < proposed - current {
                alpha = prop_alpha;
                log_sigma = prop_log_sigma;
                current = proposed;
                accepted += 1;
            }
        }
        chain.push((alpha, log_sigma.exp()));
    }
    Ok(summarize(chain, cfg.burn_in, accepted))
}

fn summarize(chain: Vec<(f64, f64)>, burn_in: usize, accepted: usize) -> McmcResult {
    let post = &chain[burn_in..];
    let m = post.len() as f64;
    let mean_a = post.iter().map(|s| s.0).sum::<f64>() / m;
    let var_a = post.iter().map(|s| (s.0 - mean_a).powi(2)).sum::<f64>() / m;
    let mean_s = post.iter().map(|s| s.1).sum::<f64>() / m;
    let rate = accepted as f64 / chain.len() as f64;
    let warning = (!(0.05..0.8).contains(&rate)).then(|| format!("acceptance rate {rate:.3} outside (0.05, 0.8)"));
    let lo = post.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = post.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / HISTOGRAM_BINS as f64).max(1e-12);
    let mut histogram: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for s in post {
        let b = (((s.0 - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        histogram[b].count += 1;
    }
    McmcResult {
        chain,
        burn_in,
        posterior_mean_alpha: mean_a,
        posterior_sd_alpha: var_a.sqrt(),
        posterior_mean_sigma: mean_s,
        acceptance_rate: rate,
        acceptance_warning: warning,
        histogram,
    }
}

/// Successive differences of a path with their time spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Increment {
    pub dt: f64,
    pub dx: Vec<f64>,
}

pub fn increments_from_trajectory(traj: &[(f64, Vec<f64>)]) -> Result<Vec<Increment>> {
    traj.windows(2)
        .map(|w| {
            let ((s, a), (t, b)) = (&w[0], &w[1]);
            if !(t > s) {
                return Err(Error::domain(format!("times must increase strictly ({s} then {t})")));
            }
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    got: b.len(),
                });
            }
            Ok(Increment {
                dt: t - s,
                dx: b.iter().zip(a).map(|(u, v)| u - v).collect(),
            })
        })
        .collect()
}
