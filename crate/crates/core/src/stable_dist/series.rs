use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::{check_open_alpha, QuadratureConfig};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk;

/// Largest |x| at which the even power series for 1 < α < 2 is trusted.
pub const EVEN_SERIES_RADIUS: f64 = 2.0;

/// A truncated-series density value together with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Bound on truncation plus accumulated rounding error.
    pub error_bound: f64,
    pub terms: usize,
}

/// Density of S_α(1, 0, 0) from its series representations.
///
/// * 0 < α < 1, x ≠ 0: (1/(π|x|)) Σ_{k≥1} (−1)^{k+1} Γ(αk+1)/k! |x|^{−αk} sin(kπα/2)
/// * 0 < α < 1, x = 0: (1/π) ∫₀^∞ e^{−u^α} du, integrated numerically
/// * 1 < α < 2, |x| ≤ 2: (1/(πα)) Σ_{k≥0} (−1)^k Γ((2k+1)/α)/(2k)! x^{2k}
pub fn pdf_series(x: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<SeriesValue> {
    check_open_alpha(alpha)?;
    if alpha == 1.0 {
        return Err(Error::domain("no series branch for alpha = 1"));
    }
    if !x.is_finite() {
        return Err(Error::domain("x must be finite"));
    }
    cfg.validate()?;
    let max_terms = cfg.series_terms;
    let ax = x.abs();
    if alpha < 1.0 {
        if ax == 0.0 {
            return Ok(origin_integral(alpha));
        }
        let lx = ax.ln();
        sum_terms(max_terms, ax, |k| {
            let kf = (k + 1) as f64;
            let s = (kf * PI * alpha / 2.0).sin();
            let mag = (ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0) - alpha * kf * lx).exp();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * s * mag
        })
        .map(|v| scale(v, 1.0 / (PI * ax)))
    } else {
        if ax > EVEN_SERIES_RADIUS {
            return Err(Error::NonConvergence { terms: max_terms, x });
        }
        let lx = if ax > 0.0 { ax.ln() } else { f64::NEG_INFINITY };
        sum_terms(max_terms, ax, |k| {
            let kf = k as f64;
            if k > 0 && ax == 0.0 {
                return 0.0;
            }
            let pow = if k == 0 { 0.0 } else { 2.0 * kf * lx };
            let mag = (ln_gamma((2.0 * kf + 1.0) / alpha) - ln_gamma(2.0 * kf + 1.0) + pow).exp();
            if k % 2 == 0 {
                mag
            } else {
                -mag
            }
        })
        .map(|v| scale(v, 1.0 / (PI * alpha)))
    }
}

fn scale(v: SeriesValue, c: f64) -> SeriesValue {
    SeriesValue {
        value: v.value * c,
        error_bound: v.error_bound * c,
        terms: v.terms,
    }
}

fn sum_terms<F: Fn(usize) -> f64>(max_terms: usize, x: f64, term: F) -> Result<SeriesValue> {
    let mut sum = 0.0;
    let mut largest = 0.0f64;
    for k in 0..max_terms {
        let t = term(k);
        sum += t;
        largest = largest.max(t.abs());
        // the last few terms must all be negligible; single terms can vanish
        // where the sine factor has a zero
        let tail_small = (0..3).all(|j| {
            k >= j && {
                let tj = if j == 0 { t } else { term(k - j) };
                tj.abs() <= 1e-16 * sum.abs()
            }
        });
        if tail_small || (k > 0 && sum == 0.0 && largest == 0.0) {
            let rounding = largest * f64::EPSILON * (k + 1) as f64;
            return Ok(SeriesValue {
                value: sum,
                error_bound: t.abs() + rounding,
                terms: k + 1,
            });
        }
    }
    Err(Error::NonConvergence { terms: max_terms, x })
}

fn origin_integral(alpha: f64) -> SeriesValue {
    let mut total = 0.0;
    let mut err = 0.0;
    let (mut a, mut b) = (0.0, 1.0);
    loop {
        let (v, e) = adaptive_gk(a, b, 1e-15, 1e-14, 400, |u: f64| (-u.powf(alpha)).exp());
        total += v;
        err += e;
        if (-b.powf(alpha)).exp() * b < 1e-17 * total {
            break;
        }
        a = b;
        b *= 2.0;
    }
    SeriesValue {
        value: total / PI,
        error_bound: err / PI,
        terms: 0,
    }
}
