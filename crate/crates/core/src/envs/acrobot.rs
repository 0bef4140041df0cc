use std::f64::consts::PI;

use rand::Rng as _;

use super::{clip_scalar_action, start_rng, EnvKind, EnvState, Environment, StepResult};
use crate::error::{Error, Result};
use crate::Rng;

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_1: f64 = 0.5;
const LINK_COM_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;

/// Two-link underactuated pendulum with continuous torque on the elbow.
///
/// State is `(θ1, θ2, θ̇1, θ̇2)`; the observation is
/// `(cos θ1, sin θ1, cos θ2, sin θ2, θ̇1, θ̇2)`.
#[derive(Debug, Clone)]
pub struct SparseAcrobot {
    horizon: usize,
    state: [f64; 4],
    steps: usize,
    done: bool,
    rng: Rng,
}

impl SparseAcrobot {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            state: [0.0; 4],
            steps: 0,
            done: false,
            rng: start_rng(0),
        }
    }

    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.steps = 0;
        self.done = false;
    }

    pub fn raw_state(&self) -> [f64; 4] {
        self.state
    }

    fn observation(&self) -> Vec<f64> {
        let [t1, t2, v1, v2] = self.state;
        vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), v1, v2]
    }

    fn env_state(&self) -> EnvState {
        EnvState {
            observation: self.observation(),
            done: self.done,
            steps_elapsed: self.steps,
        }
    }

    fn tip_height(&self) -> f64 {
        let [t1, t2, ..] = self.state;
        -t1.cos() - (t1 + t2).cos()
    }
}

/// Equations of motion (book formulation), torque held constant.
fn derivatives(s: [f64; 4], torque: f64) -> [f64; 4] {
    let [theta1, theta2, dtheta1, dtheta2] = s;
    let (m1, m2, l1, lc1, lc2) = (LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_1, LINK_COM_2);
    let (i1, i2, g) = (LINK_MOI, LINK_MOI, GRAVITY);

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn rk4(s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], b: [f64; 4], h: f64| -> [f64; 4] {
        [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]]
    };
    let k1 = derivatives(s, torque);
    let k2 = derivatives(add(s, k1, dt / 2.0), torque);
    let k3 = derivatives(add(s, k2, dt / 2.0), torque);
    let k4 = derivatives(add(s, k3, dt), torque);
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Wraps an angle into `[-π, π)`.
fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Environment for SparseAcrobot {
    fn kind(&self) -> EnvKind {
        EnvKind::SparseAcrobot
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        self.rng = start_rng(seed);
        self.restart()
    }

    fn restart(&mut self) -> EnvState {
        let mut s = [0.0; 4];
        for v in &mut s {
            *v = self.rng.random_range(-0.1..0.1);
        }
        self.set_state(s);
        self.env_state()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let torque = clip_scalar_action(action)?;
        let next = rk4(self.state, torque, DT);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("acrobot integration".into()));
        }
        self.state = [
            wrap_angle(next[0]),
            wrap_angle(next[1]),
            next[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            next[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ];
        self.steps += 1;

        let goal = self.tip_height() > 1.0;
        self.done = goal || self.steps >= self.horizon;
        Ok(StepResult {
            observation: self.observation(),
            reward: if goal { 1.0 } else { 0.0 },
            done: self.done,
        })
    }
}
