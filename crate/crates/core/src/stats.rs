//! Empirical-distribution checks used to validate samplers and densities.

use crate::quadrature::GaussLegendre;

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF given
/// at the sorted sample points.
///
/// `sorted` must be ascending and `cdf[i]` must equal F(sorted[i]).
pub fn ks_statistic(sorted: &[f64], cdf: &[f64]) -> f64 {
    assert_eq!(sorted.len(), cdf.len());
    let n = sorted.len() as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &f)| {
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (hi - f).max(f - lo)
        })
        .fold(0.0, f64::max)
}

/// CDF of a symmetric density at ascending points, F(x) = ½ + ∫₀^x p.
///
/// Integrates `pdf` between consecutive |x| values; wide gaps are split on a
/// logarithmic scale so heavy tails are resolved.
pub fn symmetric_cdf_at<P: Fn(f64) -> f64>(sorted: &[f64], pdf: P) -> Vec<f64> {
    let gl = GaussLegendre::new(8);
    let mut order: Vec<usize> = (0..sorted.len()).collect();
    order.sort_by(|&a, &b| sorted[a].abs().total_cmp(&sorted[b].abs()));
    let mut out = vec![0.0; sorted.len()];
    let mut acc = 0.0;
    let mut prev = 0.0f64;
    for idx in order {
        let y = sorted[idx].abs();
        if y > prev {
            acc += integrate_span(&gl, prev, y, &pdf);
            prev = y;
        }
        out[idx] = if sorted[idx] < 0.0 { 0.5 - acc } else { 0.5 + acc };
    }
    out
}

fn integrate_span<P: Fn(f64) -> f64>(gl: &GaussLegendre, a: f64, b: f64, pdf: &P) -> f64 {
    const LINEAR_LIMIT: f64 = 1.0;
    let mut total = 0.0;
    let mut lo = a;
    if lo < LINEAR_LIMIT {
        let hi = b.min(LINEAR_LIMIT);
        let pieces = ((hi - lo) / 0.125).ceil().max(1.0) as usize;
        let w = (hi - lo) / pieces as f64;
        for k in 0..pieces {
            let l = lo + k as f64 * w;
            total += gl.integrate(l, l + w, pdf);
        }
        lo = hi;
    }
    if b > lo {
        let (ul, ub) = (lo.ln(), b.ln());
        let pieces = ((ub - ul) / 0.25).ceil().max(1.0) as usize;
        let w = (ub - ul) / pieces as f64;
        for k in 0..pieces {
            let l = ul + k as f64 * w;
            total += gl.integrate(l, l + w, |u| {
                let x = u.exp();
                pdf(x) * x
            });
        }
    }
    total
}

/// Least-squares slope of log P(|X| > y) against log y on `points`
/// log-spaced levels in [lo, hi], using only levels with at least
/// `min_count` exceedances. Returns `None` with fewer than two usable levels.
pub fn tail_slope(sample: &[f64], lo: f64, hi: f64, points: usize, min_count: usize) -> Option<f64> {
    let mut abs: Vec<f64> = sample.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len() as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..points {
        let t = if points == 1 {
            0.0
        } else {
            k as f64 / (points - 1) as f64
        };
        let y = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
        let above = abs.len() - abs.partition_point(|&v| v <= y);
        if above >= min_count {
            xs.push(y.ln());
            ys.push((above as f64 / n).ln());
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Median of a slice (average of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cauchy_cdf_by_quadrature() {
        let xs = [-300.0, -2.0, -0.1, 0.0, 0.5, 3.0, 1e4];
        let f = symmetric_cdf_at(&xs, |x| 1.0 / (PI * (1.0 + x * x)));
        for (x, got) in xs.iter().zip(f) {
            let want = 0.5 + x.atan() / PI;
            assert!((got - want).abs() < 1e-10, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn ks_of_perfect_grid() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, &xs);
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn pareto_tail_slope() {
        // survival y^{-1.3} on [1, ∞) via inverse transform of a grid
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) / n as f64).powf(-1.0 / 1.3)).collect();
        let s = tail_slope(&xs, 10.0, 1e3, 20, 5).unwrap();
        assert!((s + 1.3).abs() < 0.01, "{s}");
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
