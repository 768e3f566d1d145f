use std::ops::Range;

use crate::error::{Error, Result};
use crate::neural::Mlp;
use crate::sde_sim::SnapshotDataset;

/// Closed-form Cauchy scale estimate ½[mean √|r|]² of centred residuals.
pub fn cauchy_scale(residuals: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = residuals
        .into_iter()
        .fold((0.0, 0usize), |(s, n), r| (s + r.abs().sqrt(), n + 1));
    (n > 0).then(|| 0.5 * (sum / n as f64).powi(2))
}

/// Per-dimension residuals x1 − x0 − h f̂(x0) of the records in `range`,
/// laid out record-major.
fn residuals(ds: &SnapshotDataset, f_hat: &Mlp, range: Range<usize>) -> Vec<f64> {
    let d = ds.dim();
    let mut ws = f_hat.workspace();
    let mut out = Vec::with_capacity(range.len() * d);
    let mut last_x0: Option<&[f64]> = None;
    let mut f = vec![0.0; d];
    for i in range {
        let x0 = ds.x0(i);
        if last_x0 != Some(x0) {
            f.copy_from_slice(f_hat.forward_ws(x0, &mut ws));
            last_x0 = Some(x0);
        }
        let h = ds.h(i);
        for k in 0..d {
            out.push(ds.x1(i)[k] - x0[k] - h * f[k]);
        }
    }
    out
}

fn scale_per_dim(ds: &SnapshotDataset, f_hat: &Mlp, range: Range<usize>) -> Result<Vec<f64>> {
    let d = ds.dim();
    let h = ds.h(range.start);
    let r = residuals(ds, f_hat, range);
    (0..d)
        .map(|k| {
            cauchy_scale(r.iter().skip(k).step_by(d).copied())
                .map(|s| s / h)
                .ok_or_else(|| Error::numerical("empty residual set"))
        })
        .collect()
}

/// Diffusion estimate of one x0 group: the residual scale divided by h,
/// since a step of Cauchy noise has scale g(x0)·h.
pub fn cauchy_sigma_direct(ds: &SnapshotDataset, f_hat: &Mlp, group_index: usize) -> Result<Vec<f64>> {
    let groups = ds.groups()?;
    let range = groups
        .get(group_index)
        .cloned()
        .ok_or_else(|| Error::config(format!("group {group_index} out of range ({} groups)", groups.len())))?;
    if range.is_empty() {
        return Err(Error::GroupTooSmall {
            group: group_index,
            size: 0,
            min: 1,
        });
    }
    scale_per_dim(ds, f_hat, range)
}

/// One diffusion estimate over all records (additive noise). Records must
/// share a single step h.
pub fn cauchy_sigma_pooled(ds: &SnapshotDataset, f_hat: &Mlp) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::config("empty dataset"));
    }
    let h = ds.h(0);
    if (1..ds.len()).any(|i| ds.h(i) != h) {
        return Err(Error::config("pooled Cauchy diffusion needs a single step size h"));
    }
    scale_per_dim(ds, f_hat, 0..ds.len())
}
