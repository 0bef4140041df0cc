use super::RunningNormalizer;

/// Largest magnitude of a scaled reward.
pub const REWARD_CLIP: f64 = 10.0;

const VAR_EPS: f64 = 1e-8;

/// Divides rewards by the running standard deviation of the discounted return.
/// The return accumulator carries across epochs and restarts at episode ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnScaler {
    gamma: f64,
    ret: f64,
    stats: RunningNormalizer,
}

impl ReturnScaler {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            ret: 0.0,
            stats: RunningNormalizer::new(1),
        }
    }

    pub fn std(&self) -> f64 {
        (self.stats.variance()[0] + VAR_EPS).sqrt()
    }

    /// Scales one epoch of rewards in order, updating the statistics per step.
    pub fn scale(&mut self, rewards: &[f64], dones: &[bool]) -> Vec<f64> {
        debug_assert_eq!(rewards.len(), dones.len());
        rewards
            .iter()
            .zip(dones)
            .map(|(&r, &done)| {
                self.ret = self.ret * self.gamma + r;
                self.stats.update(&[self.ret]);
                let scaled = (r / self.std()).clamp(-REWARD_CLIP, REWARD_CLIP);
                if done {
                    self.ret = 0.0;
                }
                scaled
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_reward_hand_unrolled() {
        let mut s = ReturnScaler::new(0.5);
        let out = s.scale(&[1.0, 1.0], &[false, false]);
        // returns 1 then 1.5; population std after two is 0.25
        assert_eq!(out[0], REWARD_CLIP);
        assert!((out[1] - 1.0 / (0.0625f64 + VAR_EPS).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn done_restarts_the_return() {
        let mut a = ReturnScaler::new(0.9);
        a.scale(&[2.0], &[true]);
        a.scale(&[3.0], &[false]);
        let mut b = ReturnScaler::new(0.9);
        b.scale(&[2.0], &[false]);
        b.scale(&[3.0], &[false]);
        // second return is 3 after a reset and 4.8 without
        assert!(a.std() < b.std());
    }

    #[test]
    fn zero_rewards_stay_zero() {
        let mut s = ReturnScaler::new(0.99);
        assert!(s.scale(&[0.0; 5], &[false; 5]).iter().all(|r| *r == 0.0));
    }

    #[test]
    fn relative_order_survives_scaling() {
        let mut s = ReturnScaler::new(0.99);
        s.scale(&[1e-5; 100], &[false; 100]);
        let out = s.scale(&[1e-5, 2e-5], &[false, false]);
        assert!(out[1] > out[0] && out[0] > 0.0);
    }
}
