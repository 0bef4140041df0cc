use crate::bnn::BayesianDynamics;
use crate::error::{Error, Result};
use crate::ppo::RolloutBuffer;
use crate::Rng;

use super::{KlQueue, Projection};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScoreStats {
    /// Mean un-normalised information gain over the epoch.
    pub raw_kl_mean: f64,
    pub mean_bonus: f64,
    /// Divisor the raw values were scaled by.
    pub divisor: f64,
}

/// Writes `η · KL / median(queue)` into `buffer.intrinsic` for every step and
/// then pushes the epoch's mean raw KL onto the queue.
///
/// The divisor comes from strictly earlier epochs. `dataset_size` is the
/// replay size used to weight the prior term of the per-transition objective.
#[allow(clippy::too_many_arguments)]
pub fn score_epoch(
    buffer: &mut RolloutBuffer,
    model: &dyn BayesianDynamics,
    projection: &Projection<'_>,
    queue: &mut KlQueue,
    eta: f64,
    step: f64,
    dataset_size: usize,
    rng: &mut Rng,
) -> Result<ScoreStats> {
    if buffer.is_empty() {
        return Err(Error::Usage("cannot score an empty buffer".into()));
    }
    if !(eta >= 0.0) {
        return Err(Error::Config("eta must be nonnegative".into()));
    }
    let divisor = queue.normalizer();
    let mut raw = Vec::with_capacity(buffer.len());
    for i in 0..buffer.len() {
        let (x, y) = projection.pair(&buffer.observations[i], &buffer.env_actions[i], &buffer.next_observations[i])?;
        raw.push(model.info_gain_exact(&x, &y, step, dataset_size, rng)?);
    }
    let n = raw.len() as f64;
    let raw_kl_mean = raw.iter().sum::<f64>() / n;
    buffer.intrinsic = raw.iter().map(|k| eta * k / divisor).collect();
    let mean_bonus = buffer.intrinsic.iter().sum::<f64>() / n;
    queue.push(raw_kl_mean);
    Ok(ScoreStats {
        raw_kl_mean,
        mean_bonus,
        divisor,
    })
}
