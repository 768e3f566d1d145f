use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A vector field R^d → R^d written into an output slice.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Ground-truth SDE dX = f(X)dt + diag(g(X)) dL with a box of initial points.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    drift: VectorField,
    diffusion: VectorField,
    /// Per-axis (lo, hi) bounds for initial points.
    pub domain: Vec<(f64, f64)>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        domain: Vec<(f64, f64)>,
        drift: VectorField,
        diffusion: VectorField,
    ) -> Result<Self> {
        let dim = domain.len();
        if dim == 0 {
            return Err(Error::config("system needs at least one dimension"));
        }
        if domain.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(Error::config("domain bounds must satisfy lo <= hi"));
        }
        Ok(Self {
            name: name.into(),
            dim,
            drift,
            diffusion,
            domain,
        })
    }

    /// Convenience constructor for scalar systems.
    pub fn scalar<F, G>(name: &str, lo: f64, hi: f64, f: F, g: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            dim: 1,
            drift: Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = f(x[0])),
            diffusion: Arc::new(move |x: &[f64], out: &mut [f64]| out[0] = g(x[0])),
            domain: vec![(lo, hi)],
        }
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        out
    }

    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.diffusion_into(x, &mut out);
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter()
                .zip(&self.domain)
                .all(|(&v, &(lo, hi))| v >= lo - 1e-12 && v <= hi + 1e-12)
    }
}

type Scalar = fn(f64) -> f64;

const SCALAR_SYSTEMS: &[(&str, f64, f64, Scalar, Scalar)] = &[
    ("cauchy_ou_add", -3.0, 3.0, |x| -x + 1.0, |_| 1.0),
    ("cauchy_square_add", -3.0, 3.0, |x| -x * x, |_| 1.0),
    ("cauchy_sin_add", -3.0, 3.0, f64::sin, |_| 1.0),
    ("cauchy_ou_mult", -3.0, 3.0, |x| -x + 1.0, |x| 0.1 * x + 0.5),
    ("cauchy_square_mult", -3.0, 3.0, |x| -x * x, |x| 0.1 * x + 0.5),
    ("cauchy_sin_mult", -3.0, 3.0, f64::sin, |x| 0.1 * x + 0.5),
    ("ou_add", -1.0, 1.0, |x| -x + 1.0, |_| 1.0),
    ("double_well_add", -1.0, 1.0, |x| -x * x * x + x, |_| 1.0),
    (
        "log_cuberoot_add",
        -1.0,
        1.0,
        |x| (x + 1.5).ln() - (x + 1.5).abs().cbrt(),
        |_| 1.0,
    ),
    ("double_well_linear_mult", -1.0, 1.0, |x| -x * x * x + x, |x| x + 1.0),
    (
        "double_well_sin_mult",
        -1.0,
        1.0,
        |x| -x * x * x + x,
        |x| (PI * x).sin() + 1.0,
    ),
    ("ou_linear_mult", -1.0, 1.0, |x| -x + 1.0, |x| x + 1.0),
    ("km_compare", -2.5, 2.5, |x| 4.0 * x - x * x * x, |_| 1.0),
    ("ou_small_noise", -1.0, 1.0, |x| -x + 1.0, |_| 0.1),
];

/// Names accepted by [`builtin_system`].
pub fn builtin_names() -> Vec<String> {
    SCALAR_SYSTEMS
        .iter()
        .map(|s| s.0.to_string())
        .chain(["maier_stein".to_string(), "coupled_linear_2d".to_string()])
        .collect()
}

/// Looks up a ground-truth system by name.
pub fn builtin_system(name: &str) -> Result<SystemSpec> {
    if let Some(&(n, lo, hi, f, g)) = SCALAR_SYSTEMS.iter().find(|s| s.0 == name) {
        return Ok(SystemSpec::scalar(n, lo, hi, f, g));
    }
    match name {
        "maier_stein" => SystemSpec::new(
            name,
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            Arc::new(|x: &[f64], out: &mut [f64]| {
                let (a, b) = (x[0], x[1]);
                out[0] = a - a * a * a - a * b * b;
                out[1] = -(1.0 + a * a) * b;
            }),
            Arc::new(|_: &[f64], out: &mut [f64]| {
                out[0] = 1.0;
                out[1] = 1.0;
            }),
        ),
        "coupled_linear_2d" => SystemSpec::new(
            name,
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = x[0] + x[1];
                out[1] = 4.0 * x[0] - 2.0 * x[1];
            }),
            Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = 0.5 * x[1] + 1.0;
                out[1] = 0.5 * x[0] + 1.0;
            }),
        ),
        _ => Err(Error::UnknownSystem {
            name: name.to_string(),
            available: builtin_names(),
        }),
    }
}
