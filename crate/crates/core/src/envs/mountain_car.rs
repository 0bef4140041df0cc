use rand::Rng as _;

use super::{clip_scalar_action, start_rng, EnvKind, EnvState, Environment, StepResult};
use crate::error::Result;
use crate::Rng;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.45;
pub const POWER: f64 = 0.0015;

/// Continuous-force MountainCar with a single unit reward at the goal.
#[derive(Debug, Clone)]
pub struct SparseMountainCar {
    horizon: usize,
    position: f64,
    velocity: f64,
    steps: usize,
    done: bool,
    rng: Rng,
}

impl SparseMountainCar {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            position: -0.5,
            velocity: 0.0,
            steps: 0,
            done: false,
            rng: start_rng(0),
        }
    }

    /// Places the car at an explicit state, clearing the episode counters.
    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.done = false;
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }

    fn state(&self) -> EnvState {
        EnvState {
            observation: self.observation(),
            done: self.done,
            steps_elapsed: self.steps,
        }
    }
}

impl Environment for SparseMountainCar {
    fn kind(&self) -> EnvKind {
        EnvKind::SparseMountainCar
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        self.rng = start_rng(seed);
        self.restart()
    }

    fn restart(&mut self) -> EnvState {
        let position = self.rng.random_range(-0.6..-0.4);
        self.set_state(position, 0.0);
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let force = clip_scalar_action(action)?;
        self.velocity += force * POWER - 0.0025 * (3.0 * self.position).cos();
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position = (self.position + self.velocity).clamp(MIN_POSITION, MAX_POSITION);
        if self.position == MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }
        self.steps += 1;

        let goal = self.position >= GOAL_POSITION;
        self.done = goal || self.steps >= self.horizon;
        Ok(StepResult {
            observation: self.observation(),
            reward: if goal { 1.0 } else { 0.0 },
            done: self.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_seeded_and_at_rest() {
        let mut a = SparseMountainCar::new(1000);
        let mut b = SparseMountainCar::new(1000);
        let sa = a.reset(11);
        assert_eq!(sa, b.reset(11));
        assert_eq!(sa.observation[1], 0.0);
        assert!((-0.6..=-0.4).contains(&sa.observation[0]));
    }

    #[test]
    fn gravity_only_update() {
        let mut env = SparseMountainCar::new(1000);
        env.set_state(-0.5, 0.0);
        let r = env.step(&[0.0]).unwrap();
        let expected = -0.0025 * (-1.5f64).cos();
        assert!((r.observation[1] - expected).abs() < 1e-15);
        assert!((expected - -1.768e-4).abs() < 1e-7);
        assert_eq!(r.reward, 0.0);
        assert!(!r.done);
    }

    #[test]
    fn goal_pays_one_and_terminates() {
        let mut env = SparseMountainCar::new(1000);
        env.set_state(0.44, 0.07);
        let r = env.step(&[1.0]).unwrap();
        assert_eq!(r.reward, 1.0);
        assert!(r.done);
    }

    #[test]
    fn horizon_terminates_without_reward() {
        let mut env = SparseMountainCar::new(3);
        env.reset(0);
        let rewards: Vec<_> = (0..3).map(|_| env.step(&[0.0]).unwrap()).collect();
        assert!(rewards[2].done && rewards[2].reward == 0.0);
        assert!(!rewards[1].done);
    }

    #[test]
    fn oversized_actions_are_clipped() {
        let mut a = SparseMountainCar::new(1000);
        let mut b = SparseMountainCar::new(1000);
        a.set_state(-0.5, 0.0);
        b.set_state(-0.5, 0.0);
        assert_eq!(a.step(&[7.0]).unwrap(), b.step(&[1.0]).unwrap());
    }
}
