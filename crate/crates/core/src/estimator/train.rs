use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neural::{Mlp, OptimizerState};

use super::config::StageConfig;

/// Mini-batch schedule shared by all training stages.
pub(crate) struct Schedule<'a> {
    pub name: &'a str,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub shuffle: bool,
    pub records: usize,
    pub seed: u64,
    pub stream: u64,
    /// Per-network learning-rate schedules.
    pub rates: Vec<StageConfig>,
}

impl<'a> Schedule<'a> {
    pub fn from_stage(name: &'a str, stage: &StageConfig, records: usize, seed: u64, stream: u64) -> Self {
        Self {
            name,
            epochs: stage.epochs,
            batch_size: stage.batch_size,
            shuffle: stage.shuffle,
            records,
            seed,
            stream,
            rates: vec![stage.clone()],
        }
    }

    pub fn with_rates(mut self, rates: Vec<StageConfig>) -> Self {
        self.rates = rates;
        self
    }
}

/// Runs mini-batch training of one or more networks. `batch` returns the
/// mean loss and one gradient per network (an empty gradient leaves that
/// network untouched). Returns the record-weighted mean loss per epoch.
pub(crate) fn run_stage<F>(
    schedule: &Schedule<'_>,
    nets: &mut [&mut Mlp],
    opts: &mut [OptimizerState],
    mut batch: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[usize], &[&Mlp]) -> Result<(f64, Vec<Vec<f64>>)>,
{
    if schedule.records == 0 {
        return Err(Error::config(format!("{}: no training records", schedule.name)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    rng.set_stream(schedule.stream);
    let mut order: Vec<usize> = (0..schedule.records).collect();
    let size = schedule.batch_size.unwrap_or(schedule.records).min(schedule.records);
    let mut curve = Vec::with_capacity(schedule.epochs);
    let diverged = |epoch: usize, curve: &[f64]| Error::Divergence {
        stage: schedule.name.to_string(),
        epoch,
        last_finite: curve.last().copied(),
    };
    for epoch in 1..=schedule.epochs {
        for (opt, rate) in opts.iter_mut().zip(&schedule.rates) {
            opt.learning_rate = rate.learning_rate_at(epoch);
        }
        if schedule.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(size) {
            let (loss, grads) = {
                let views: Vec<&Mlp> = nets.iter().map(|n| &**n).collect();
                batch(chunk, &views)?
            };
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(diverged(epoch, &curve));
            }
            total += loss * chunk.len() as f64;
            for ((net, opt), grad) in nets.iter_mut().zip(opts.iter_mut()).zip(&grads) {
                if !grad.is_empty() {
                    opt.step(net.params_mut(), grad)?;
                }
            }
        }
        let mean = total / schedule.records as f64;
        if !mean.is_finite() || nets.iter().any(|n| n.params().iter().any(|p| !p.is_finite())) {
            return Err(diverged(epoch, &curve));
        }
        curve.push(mean);
    }
    Ok(curve)
}
