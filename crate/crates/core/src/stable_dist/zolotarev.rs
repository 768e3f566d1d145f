use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::rc::Rc;

use statrs::function::gamma::ln_gamma;

use super::{check_open_alpha, density_at_zero, QuadratureConfig};
use crate::error::{Error, Result};

const WINDOW_LO: f64 = 1e-4;
const WINDOW_HI: f64 = 40.0;
const TINY_X: f64 = 1e-10;
const MAX_NODES: usize = 2_000_000;

/// Precomputed quadrature for the Zolotarev integral at a fixed α.
///
/// With V(θ) = (cos θ / sin αθ)^{α/(α−1)} · cos((α−1)θ)/cos θ the standard
/// symmetric density for x > 0 is
///
/// p(x) = α x^{1/(α−1)} / (π|α−1|) · ∫₀^{π/2} V(θ) exp(−x^{α/(α−1)} V(θ)) dθ.
///
/// Nodes are laid out uniformly in u = ±log V(θ) + c·θ, which keeps the
/// sharp bump of the integrand resolved for every x. Sorting nodes by log V
/// lets the part of the integral where the exponential is ≈ 1 be summed with
/// prefix sums, so one evaluation touches only the nodes inside the bump.
#[derive(Debug, Clone)]
pub struct ZolotarevKernel {
    alpha: f64,
    // x-exponents of the prefactor and of the exponential argument
    pre_exp: f64,
    arg_exp: f64,
    log_scale: f64,
    log_v: Vec<f64>,
    log_w: Vec<f64>,
    r1: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    small_x: f64,
    small_p: f64,
    tail_x: f64,
    p_zero: f64,
    series_terms: usize,
}

// Both the angle and its complement δ = π/2 − θ are passed so that cos θ
// and tan θ keep full relative precision near π/2.
fn log_v(alpha: f64, theta: f64, delta: f64) -> f64 {
    let k = alpha / (alpha - 1.0);
    let ln_cos = delta.sin().ln();
    k * (ln_cos - (alpha * theta).sin().ln()) + ((alpha - 1.0) * theta).cos().ln() - ln_cos
}

fn dlog_v(alpha: f64, theta: f64, delta: f64) -> f64 {
    let k = alpha / (alpha - 1.0);
    let tan = 1.0 / delta.tan();
    k * (-tan - alpha / (alpha * theta).tan()) - (alpha - 1.0) * ((alpha - 1.0) * theta).tan() + tan
}

impl ZolotarevKernel {
    pub fn new(alpha: f64, cfg: &QuadratureConfig) -> Result<Self> {
        check_open_alpha(alpha)?;
        if alpha == 1.0 {
            return Err(Error::domain("the Zolotarev representation excludes alpha = 1"));
        }
        cfg.validate()?;
        let sign = if alpha < 1.0 { 1.0 } else { -1.0 };
        let stretch = cfg.angular_weight;
        let step = cfg.node_spacing;
        // u as a function of θ (lower half) and of δ = π/2 − θ (upper half)
        let u_theta = |t: f64| sign * log_v(alpha, t, FRAC_PI_2 - t) + stretch * t;
        let du_theta = |t: f64| sign * dlog_v(alpha, t, FRAC_PI_2 - t) + stretch;
        let u_delta = |d: f64| sign * log_v(alpha, FRAC_PI_2 - d, d) + stretch * (FRAC_PI_2 - d);
        let du_delta = |d: f64| sign * dlog_v(alpha, FRAC_PI_2 - d, d) + stretch;

        let theta_lo = cfg
            .endpoint_shrink
            .min(1e-11 * (-30.0 * (1.0 - alpha).abs()).exp() / alpha);
        let delta_lo = cfg.endpoint_shrink.min(1e-30);
        let (u_lo, u_mid, u_hi) = (u_theta(theta_lo), u_theta(FRAC_PI_4), u_delta(delta_lo));
        if !(u_lo.is_finite() && u_hi.is_finite() && u_lo < u_mid && u_mid < u_hi) {
            return Err(Error::numerical(format!(
                "degenerate Zolotarev node map at alpha = {alpha}"
            )));
        }
        let count = ((u_hi - u_lo) / step).floor() as usize;
        if count > MAX_NODES {
            return Err(Error::numerical(format!(
                "alpha = {alpha} needs {count} Zolotarev nodes; too close to 1"
            )));
        }

        let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(count);
        let mut prev_theta = theta_lo;
        let mut prev_delta = FRAC_PI_4;
        for j in 0..count {
            let target = u_lo + (j as f64 + 0.5) * step;
            let (s, slope) = if target <= u_mid {
                let t = solve_increasing(&u_theta, &du_theta, target, prev_theta, FRAC_PI_4, prev_theta);
                prev_theta = t;
                (log_v(alpha, t, FRAC_PI_2 - t), du_theta(t))
            } else {
                // u decreases in δ, so solve −u(δ) = −target
                let d = solve_increasing(
                    &|d: f64| -u_delta(d),
                    &|d: f64| du_delta(d),
                    -target,
                    delta_lo,
                    prev_delta,
                    prev_delta,
                );
                prev_delta = d;
                (log_v(alpha, FRAC_PI_2 - d, d), du_delta(d))
            };
            let lw = (step / slope).ln();
            if !(s.is_finite() && lw.is_finite()) {
                return Err(Error::numerical(format!(
                    "non-finite Zolotarev node at u = {target}, alpha = {alpha}"
                )));
            }
            nodes.push((s, lw));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let log_v: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let log_w: Vec<f64> = nodes.iter().map(|n| n.1).collect();

        let n = log_v.len();
        let (mut r1, mut r2, mut r3) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 1..n {
            let d = log_v[j - 1] - log_v[j];
            let w = log_w[j - 1].exp();
            r1[j] = (r1[j - 1] + w) * d.exp();
            r2[j] = (r2[j - 1] + w) * (2.0 * d).exp();
            r3[j] = (r3[j - 1] + w) * (3.0 * d).exp();
        }

        let pre_exp = 1.0 / (alpha - 1.0);
        let arg_exp = alpha / (alpha - 1.0);
        let rate = alpha.max(1.0 / alpha);
        // bump centre s* = −arg_exp·ln x must stay this far inside the node range
        let s_lo = log_v[0] + 28.0 / rate;
        let s_hi = log_v[n - 1] - WINDOW_HI.ln() - 1.0;
        if s_lo >= s_hi {
            return Err(Error::numerical(format!(
                "Zolotarev node range too narrow at alpha = {alpha}"
            )));
        }
        let (x_from_lo, x_from_hi) = ((-s_lo / arg_exp).exp(), (-s_hi / arg_exp).exp());
        let (small_x, tail_x) = if alpha > 1.0 {
            (x_from_hi, x_from_lo)
        } else {
            (x_from_lo, x_from_hi)
        };

        let mut kernel = Self {
            alpha,
            pre_exp,
            arg_exp,
            log_scale: (alpha / (PI * (alpha - 1.0).abs())).ln(),
            log_v,
            log_w,
            r1,
            r2,
            r3,
            small_x,
            small_p: 0.0,
            tail_x,
            p_zero: density_at_zero(alpha),
            series_terms: cfg.series_terms.max(60),
        };
        kernel.small_p = kernel.core(small_x).0.exp();
        Ok(kernel)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn node_count(&self) -> usize {
        self.log_v.len()
    }

    /// Below this |x| the density is blended towards p(0).
    pub fn small_x_switch(&self) -> f64 {
        self.small_x
    }

    /// Above this |x| the asymptotic tail expansion is used.
    pub fn tail_switch(&self) -> f64 {
        self.tail_x
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.pdf_and_score(x).0
    }

    /// Returns (p(x), d/dx log p(x)).
    pub fn pdf_and_score(&self, x: f64) -> (f64, f64) {
        let (lp, score) = self.log_pdf_and_score(x);
        (lp.exp(), score)
    }

    /// Returns (log p(x), d/dx log p(x)).
    pub fn log_pdf_and_score(&self, x: f64) -> (f64, f64) {
        let ax = x.abs();
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let (lp, ds) = if ax < TINY_X {
            (self.p_zero.ln(), 0.0)
        } else if ax < self.small_x {
            let r = ax / self.small_x;
            let dp = self.small_p - self.p_zero;
            let p = self.p_zero + dp * r * r;
            (p.ln(), 2.0 * dp * ax / (self.small_x * self.small_x * p))
        } else if ax > self.tail_x {
            self.tail(ax)
        } else {
            self.core(ax)
        };
        (lp, sign * ds)
    }

    fn core(&self, x: f64) -> (f64, f64) {
        let lx = x.ln();
        let lc = self.arg_exp * lx;
        let la = self.pre_exp * lx;
        let lo_cut = WINDOW_LO.ln() - lc;
        let hi_cut = WINDOW_HI.ln() - lc;
        let j0 = self.log_v.partition_point(|&v| v < lo_cut);
        let j1 = self.log_v.partition_point(|&v| v <= hi_cut);
        let n = self.log_v.len();

        // all terms are scaled by e^{-(la + s_ref)} to keep sums in range
        let s_ref = self.log_v[j0.min(n - 1)];
        let (mut f, mut h) = (0.0, 0.0);
        for j in j0..j1 {
            let s = self.log_v[j];
            let cv = (lc + s).exp();
            let t = (self.log_w[j] + s - s_ref - cv).exp();
            f += t;
            h += cv * t;
        }
        if j0 > 0 && j0 < n {
            let q = (lc + s_ref).exp();
            f += self.r1[j0] - q * self.r2[j0] + 0.5 * q * q * self.r3[j0];
            h += q * self.r2[j0] - q * q * self.r3[j0];
        }
        let lp = self.log_scale + la + s_ref + f.ln();
        let score = (self.pre_exp - self.arg_exp * h / f) / x;
        (lp, score)
    }

    fn tail(&self, x: f64) -> (f64, f64) {
        let (p, dp) = tail_expansion(x, self.alpha, self.series_terms);
        (p.ln(), dp / p)
    }
}

/// Large-|x| expansion (1/π) Σ (−1)^{k+1} Γ(αk+1)/k! sin(kπα/2) x^{−αk−1}
/// and its derivative, truncated at the smallest term.
pub(crate) fn tail_expansion(x: f64, alpha: f64, max_terms: usize) -> (f64, f64) {
    let lx = x.ln();
    let (mut p, mut dp) = (0.0, 0.0);
    let mut prev_mag = f64::INFINITY;
    for k in 1..=max_terms {
        let kf = k as f64;
        let s = (kf * PI * alpha / 2.0).sin();
        if s.abs() < 1e-14 {
            continue;
        }
        let base = (ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0) - (alpha * kf + 1.0) * lx).exp();
        if base > prev_mag {
            break;
        }
        prev_mag = base;
        let mag = base * s.abs();
        let sgn = if k % 2 == 1 { 1.0 } else { -1.0 } * s.signum();
        p += sgn * mag;
        dp -= sgn * mag * (alpha * kf + 1.0) / x;
        if mag < 1e-17 * p.abs() {
            break;
        }
    }
    (p / PI, dp / PI)
}

/// Probability mass P(X > x) for large x > 0 from the termwise integral of
/// the tail expansion, Σ c_k x^{−αk}/(αk).
pub fn tail_mass(x: f64, alpha: f64, max_terms: usize) -> f64 {
    let lx = x.ln();
    let mut total = 0.0;
    let mut prev_mag = f64::INFINITY;
    for k in 1..=max_terms {
        let kf = k as f64;
        let s = (kf * PI * alpha / 2.0).sin();
        if s.abs() < 1e-14 {
            continue;
        }
        let base = (ln_gamma(alpha * kf + 1.0) - ln_gamma(kf + 1.0) - alpha * kf * lx).exp() / (alpha * kf);
        if base > prev_mag {
            break;
        }
        prev_mag = base;
        let mag = base * s.abs();
        total += if k % 2 == 1 { 1.0 } else { -1.0 } * s.signum() * mag;
        if mag < 1e-17 * total.abs() {
            break;
        }
    }
    total / PI
}

fn solve_increasing<F, D>(f: &F, df: &D, target: f64, lo: f64, hi: f64, start: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut t = start;
    for _ in 0..200 {
        let g = f(t) - target;
        if g.abs() <= 1e-13 * target.abs().max(1.0) {
            return t;
        }
        if g < 0.0 {
            a = t;
        } else {
            b = t;
        }
        let mut next = t - g / df(t);
        if !(next > a && next < b) {
            // bisect in log space when the bracket spans many decades
            next = if a > 0.0 && b / a > 4.0 {
                (a * b).sqrt()
            } else {
                0.5 * (a + b)
            };
        }
        if (next - t).abs() <= 1e-16 * t.abs() {
            return next;
        }
        t = next;
    }
    t
}

thread_local! {
    static CACHE: RefCell<Option<(u64, QuadratureConfig, Rc<ZolotarevKernel>)>> =
        const { RefCell::new(None) };
}

fn cached_kernel(alpha: f64, cfg: &QuadratureConfig) -> Result<Rc<ZolotarevKernel>> {
    CACHE.with(|cell| {
        if let Some((bits, c, k)) = cell.borrow().as_ref() {
            if *bits == alpha.to_bits() && c == cfg {
                return Ok(Rc::clone(k));
            }
        }
        let k = Rc::new(ZolotarevKernel::new(alpha, cfg)?);
        *cell.borrow_mut() = Some((alpha.to_bits(), *cfg, Rc::clone(&k)));
        Ok(k)
    })
}

/// Density of S_α(1, 0, 0) at `x` by the Zolotarev integral.
pub fn pdf_zolotarev(x: f64, alpha: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_open_alpha(alpha)?;
    if alpha == 1.0 {
        return Err(Error::domain("the Zolotarev representation excludes alpha = 1"));
    }
    if x.is_nan() {
        return Err(Error::domain("x is NaN"));
    }
    if x == 0.0 {
        return Ok(density_at_zero(alpha));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let p = cached_kernel(alpha, cfg)?.pdf(x.abs());
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::numerical(format!(
            "Zolotarev quadrature returned {p} at x = {x}, alpha = {alpha}"
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference densities from a 60-digit evaluation of the series representations
    const REFERENCE: [(f64, f64, f64); 8] = [
        (1.0, 0.5, 0.086_107_146_912_604_12),
        (1.0, 1.5, 0.202_038_159_607_840_13),
        (2.0, 1.5, 0.084_539_623_126_137_52),
        (1.3, 1.5, 0.161_502_006_148_899_73),
        (1.0, 1.2, 0.180_965_374_408_169_13),
        (3.0, 0.8, 0.030_040_231_532_639_80),
        (0.5, 1.9, 0.264_415_242_771_870_68),
        (2.0, 0.3, 0.025_604_819_278_083_996),
    ];

    #[test]
    fn matches_high_precision_reference() {
        let cfg = QuadratureConfig::default();
        for (x, a, want) in REFERENCE {
            let got = pdf_zolotarev(x, a, &cfg).unwrap();
            assert!((got - want).abs() < 1e-9, "x={x} a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn value_at_zero_is_closed_form() {
        let cfg = QuadratureConfig::default();
        let v = pdf_zolotarev(0.0, 1.5, &cfg).unwrap();
        assert!((v - 0.287_352_751_452_164_45).abs() < 1e-13, "{v}");
    }

    #[test]
    fn symmetric() {
        let cfg = QuadratureConfig::default();
        for a in [0.3, 0.7, 1.5, 1.9] {
            for x in [0.01, 0.7, 2.0, 40.0] {
                assert_eq!(pdf_zolotarev(-x, a, &cfg).unwrap(), pdf_zolotarev(x, a, &cfg).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let cfg = QuadratureConfig::default();
        assert!(pdf_zolotarev(1.0, 1.0, &cfg).is_err());
        assert!(pdf_zolotarev(1.0, 2.0, &cfg).is_err());
        assert!(pdf_zolotarev(1.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn continuous_at_switch_points() {
        let cfg = QuadratureConfig::default();
        for a in [0.3, 0.5, 0.8, 1.2, 1.5, 1.9] {
            let k = ZolotarevKernel::new(a, &cfg).unwrap();
            for xs in [k.small_x_switch(), k.tail_switch()] {
                let below = k.pdf(xs * (1.0 - 1e-9));
                let above = k.pdf(xs * (1.0 + 1e-9));
                assert!(
                    (below - above).abs() <= 1e-6 * below.abs(),
                    "a={a} switch={xs}: {below} vs {above}"
                );
            }
        }
    }

    #[test]
    fn score_matches_finite_difference() {
        let cfg = QuadratureConfig::default();
        for a in [0.4, 0.9, 1.1, 1.6, 1.95] {
            let k = ZolotarevKernel::new(a, &cfg).unwrap();
            for x in [-7.0f64, -0.3, 0.05, 0.8, 2.5, 30.0] {
                let eps = 1e-5 * x.abs().max(0.1);
                let fd = (k.log_pdf_and_score(x + eps).0 - k.log_pdf_and_score(x - eps).0) / (2.0 * eps);
                let (_, s) = k.log_pdf_and_score(x);
                assert!((fd - s).abs() < 1e-5 * (1.0 + s.abs()), "a={a} x={x}: {s} vs {fd}");
            }
        }
    }

    #[test]
    fn far_tail_is_power_law() {
        let cfg = QuadratureConfig::default();
        let k = ZolotarevKernel::new(1.5, &cfg).unwrap();
        let c = (PI * 0.75).sin() * statrs::function::gamma::gamma(2.5) / PI;
        let x = 1e6f64;
        assert!((k.pdf(x) / (c * x.powf(-2.5)) - 1.0).abs() < 1e-6);
    }
}
