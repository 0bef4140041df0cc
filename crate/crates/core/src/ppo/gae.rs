use crate::error::{Error, Result};

/// Generalised advantage estimation with episode-boundary masking.
///
/// `dones[t]` marks that step `t` ended its episode, so neither the value of
/// the following state nor later advantages leak across it. `last_value`
/// bootstraps the step after the final entry when that entry is not done.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    tau: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::Usage("advantage estimation needs at least one step".into()));
    }
    if values.len() != n || dones.len() != n {
        return Err(Error::Usage(format!(
            "rewards ({n}), values ({}) and dones ({}) differ in length",
            values.len(),
            dones.len()
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) || !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("invalid gamma {gamma} or tau {tau}")));
    }

    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 == n { last_value } else { values[t + 1] };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        running = delta + gamma * tau * not_done * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}
