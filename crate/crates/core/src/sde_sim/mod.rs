//! Euler–Maruyama simulation of SDEs driven by symmetric α-stable noise and
//! generation of one-step snapshot datasets.

mod dataset;
mod systems;

pub use dataset::{DatasetSidecar, SnapshotDataset};
pub use systems::{builtin_names, builtin_system, SystemSpec, VectorField};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::stable_dist::StableSampler;

/// One draw of the d-dimensional noise increment over a step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw(pub Vec<f64>);

/// x + h f(x) + diag(g(x)) · noise.
pub fn em_step(x: &[f64], sys: &SystemSpec, h: f64, noise: &NoiseDraw) -> Result<Vec<f64>> {
    if x.len() != sys.dim {
        return Err(Error::DimensionMismatch {
            expected: sys.dim,
            got: x.len(),
        });
    }
    if noise.0.len() != sys.dim {
        return Err(Error::DimensionMismatch {
            expected: sys.dim,
            got: noise.0.len(),
        });
    }
    let mut f = vec![0.0; sys.dim];
    let mut g = vec![0.0; sys.dim];
    sys.drift_into(x, &mut f);
    sys.diffusion_into(x, &mut g);
    Ok((0..sys.dim).map(|k| x[k] + h * f[k] + g[k] * noise.0[k]).collect())
}

/// Source of increments L_h: S_α(h^{1/α}, 0, 0) per component, or a
/// standard Brownian increment N(0, h) when α = 2.
pub struct NoiseSource {
    kind: NoiseKind,
}

enum NoiseKind {
    Stable(StableSampler),
    Brownian(ChaCha8Rng),
}

impl NoiseSource {
    pub fn new(alpha: f64, seed: u64, stream: u64) -> Result<Self> {
        let kind = if alpha == 2.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            NoiseKind::Brownian(rng)
        } else {
            NoiseKind::Stable(StableSampler::with_stream(alpha, seed, stream)?)
        };
        Ok(Self { kind })
    }

    /// Fills `out` with independent increments over a step of length `h`.
    pub fn draw_into(&mut self, h: f64, out: &mut [f64]) {
        match &mut self.kind {
            NoiseKind::Stable(s) => {
                let scale = h.powf(1.0 / s.alpha());
                for v in out {
                    *v = scale * s.sample();
                }
            }
            NoiseKind::Brownian(rng) => {
                let scale = h.sqrt();
                for v in out {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = scale * z;
                }
            }
        }
    }
}

/// Evenly spaced points covering the domain box, `per_axis` along each axis
/// (tensor grid for d > 1). A single point sits at the box centre.
pub fn uniform_grid(domain: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let axis = |&(lo, hi): &(f64, f64)| -> Vec<f64> {
        if per_axis == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..per_axis)
                .map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64)
                .collect()
        }
    };
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for bounds in domain {
        let values = axis(bounds);
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    if per_axis == 0 {
        return Vec::new();
    }
    points
}

/// One Euler–Maruyama step from each of `reps_per_point` copies of every
/// initial point. Group `i` draws its noise from substream `i` of `seed`.
pub fn generate_snapshots(
    sys: &SystemSpec,
    alpha: f64,
    x0_points: &[Vec<f64>],
    reps_per_point: usize,
    h: f64,
    seed: u64,
) -> Result<SnapshotDataset> {
    if reps_per_point == 0 {
        return Err(Error::config("reps_per_point must be at least 1"));
    }
    if !(h > 0.0) {
        return Err(Error::domain(format!("step h must be positive, got {h}")));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let d = sys.dim;
    let mut ds = SnapshotDataset::with_capacity(d, alpha, x0_points.len() * reps_per_point);
    let mut offsets = vec![0];
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut x1 = vec![0.0; d];
    for (gi, x0) in x0_points.iter().enumerate() {
        if x0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x0.len(),
            });
        }
        let mut source = NoiseSource::new(alpha, seed, gi as u64)?;
        sys.drift_into(x0, &mut f);
        sys.diffusion_into(x0, &mut g);
        for _ in 0..reps_per_point {
            source.draw_into(h, &mut noise);
            for k in 0..d {
                x1[k] = x0[k] + h * f[k] + g[k] * noise[k];
            }
            ds.push(x0, &x1, h)?;
        }
        offsets.push(ds.len());
    }
    ds.set_grouping(offsets)?;
    ds.system = Some(sys.name.clone());
    ds.seed = Some(seed);
    Ok(ds)
}

/// Multi-step Euler–Maruyama path (t, x) on a uniform time grid.
pub fn simulate_trajectory(
    sys: &SystemSpec,
    alpha: f64,
    x0: &[f64],
    h: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if x0.len() != sys.dim {
        return Err(Error::DimensionMismatch {
            expected: sys.dim,
            got: x0.len(),
        });
    }
    let mut source = NoiseSource::new(alpha, seed, 0)?;
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    path.push((0.0, x.clone()));
    let mut noise = vec![0.0; sys.dim];
    for n in 1..=steps {
        source.draw_into(h, &mut noise);
        x = em_step(&x, sys, h, &NoiseDraw(noise.clone()))?;
        path.push((n as f64 * h, x.clone()));
    }
    Ok(path)
}
