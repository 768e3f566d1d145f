use crate::error::{Error, Result};
use crate::sde_sim::SnapshotDataset;

/// Smallest group accepted by [`mid20_targets`].
pub const MID20_MIN_GROUP: usize = 5;

/// 1-indexed inclusive rank band ⌈0.4n⌉+1 ..= ⌊0.6n⌋, widened to the
/// median rank(s) when the band is empty.
pub fn central_band(n: usize) -> (usize, usize) {
    let lo = (2 * n).div_ceil(5) + 1;
    let hi = 3 * n / 5;
    if lo <= hi {
        (lo, hi)
    } else if n % 2 == 1 {
        (n / 2 + 1, n / 2 + 1)
    } else {
        (n / 2, n / 2 + 1)
    }
}

/// Mean of the central 20% order statistics of `values` (sorted in place).
pub fn central_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let (lo, hi) = central_band(values.len());
    let band = &values[lo - 1..hi];
    band.iter().sum::<f64>() / band.len() as f64
}

/// Replaces every group of records sharing x0 by one record whose x1 is the
/// componentwise central trimmed mean.
pub fn mid20_targets(ds: &SnapshotDataset) -> Result<SnapshotDataset> {
    let groups = ds.groups()?;
    let d = ds.dim();
    let mut out = SnapshotDataset::with_capacity(d, ds.alpha(), groups.len());
    let mut column = Vec::new();
    let mut target = vec![0.0; d];
    for (gi, range) in groups.iter().enumerate() {
        if range.len() < MID20_MIN_GROUP {
            return Err(Error::GroupTooSmall {
                group: gi,
                size: range.len(),
                min: MID20_MIN_GROUP,
            });
        }
        for (k, t) in target.iter_mut().enumerate() {
            column.clear();
            column.extend(range.clone().map(|i| ds.x1(i)[k]));
            *t = central_mean(&mut column);
        }
        out.push(ds.x0(range.start), &target, ds.h(range.start))?;
    }
    out.infer_grouping();
    out.system = ds.system.clone();
    out.seed = ds.seed;
    Ok(out)
}
