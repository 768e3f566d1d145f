use std::f64::consts::PI;

use super::QuadratureConfig;
use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk;

/// Density of S_α(1, 0, 0) by Fourier inversion,
/// (1/π) ∫₀^T cos(xt) e^{−t^α} dt.
///
/// Valid on the closed range α ∈ (0, 2], so it also covers the Cauchy and
/// Gaussian cases. The integral is split into half periods of the cosine;
/// the oscillating tail is cut once the remaining envelope is negligible.
pub fn pdf_fourier(x: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if x.is_nan() {
        return Err(Error::domain("x is NaN"));
    }
    cfg.validate()?;
    let ax = x.abs();
    let cutoff = cfg
        .fourier_cutoff
        .unwrap_or_else(|| (-(1e-16f64).ln()).powf(1.0 / alpha));
    let tol = cfg.fourier_tol * 1e-3;
    let f = |t: f64| (ax * t).cos() * (-t.powf(alpha)).exp();

    let mut total = 0.0;
    let mut edges = vec![0.0];
    if ax * cutoff <= PI {
        // fewer than one half period: geometric panels resolve the cusp at 0
        let mut t = 1.0f64.min(cutoff);
        while t < cutoff {
            edges.push(t);
            t *= 2.0;
        }
        edges.push(cutoff);
        for w in edges.windows(2) {
            total += adaptive_gk(w[0], w[1], tol, 1e-14, 400, f).0;
        }
    } else {
        let half = PI / ax;
        let mut partial: Vec<f64> = Vec::new();
        let mut last_estimate = f64::NAN;
        let mut k = 0usize;
        loop {
            let a = k as f64 * half;
            if a >= cutoff {
                break;
            }
            let b = ((k + 1) as f64 * half).min(cutoff);
            total += adaptive_gk(a, b, tol, 1e-14, 400, f).0;
            k += 1;
            // remaining alternating tail is bounded by the next half period
            let envelope = 2.0 * (-b.powf(alpha)).exp() / ax;
            if b > 1.0 && envelope < tol {
                break;
            }
            if b > 1.0 {
                partial.push(total);
                if partial.len() >= AVERAGING_DEPTH {
                    let estimate = averaged_limit(&partial[partial.len() - AVERAGING_DEPTH..]);
                    if (estimate - last_estimate).abs() < tol {
                        total = estimate;
                        break;
                    }
                    last_estimate = estimate;
                }
            }
        }
    }
    let p = total / PI;
    if !p.is_finite() {
        return Err(Error::numerical(format!("Fourier inversion returned {p} at x = {x}")));
    }
    Ok(p.max(0.0))
}

const AVERAGING_DEPTH: usize = 16;

// Repeated pairwise averaging of consecutive partial sums of an alternating
// series whose terms vary smoothly (Euler transformation).
fn averaged_limit(partial: &[f64]) -> f64 {
    let mut v = partial.to_vec();
    while v.len() > 1 {
        for i in 0..v.len() - 1 {
            v[i] = 0.5 * (v[i] + v[i + 1]);
        }
        v.pop();
    }
    v[0]
}
