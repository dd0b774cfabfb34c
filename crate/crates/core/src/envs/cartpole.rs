//! Cart-pole swing-up (optional third task).
//!
//! Standard cart-pole rigid-body dynamics with the pole angle measured from
//! upright, semi-implicit Euler at dt = 0.02. Episodes start with the pole
//! hanging down; the reward is a quadratic cost on pole angle, velocities,
//! cart offset and force. Hitting a track wall clamps the cart and zeroes its
//! velocity (no termination).

use rand::{Rng, RngCore};

use super::{check_action, wrap_angle, EnvSpec, Environment, StepResult};

pub const DT: f64 = 0.02;
pub const GRAVITY: f64 = 9.81;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
/// Half the pole length, as in the classic formulation.
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const MAX_FORCE: f64 = 10.0;
pub const TRACK_HALF_LENGTH: f64 = 2.4;
pub const MAX_CART_SPEED: f64 = 10.0;
pub const MAX_ANG_SPEED: f64 = 10.0;
pub const EPISODE_STEPS: usize = 500;

#[derive(Clone, Debug)]
pub struct CartpoleSwingup {
    spec: EnvSpec,
    x: f64,
    x_dot: f64,
    theta: f64,
    theta_dot: f64,
    step_count: usize,
}

impl CartpoleSwingup {
    pub fn new() -> Self {
        CartpoleSwingup {
            spec: EnvSpec::new(5, 1, vec![-MAX_FORCE], vec![MAX_FORCE], EPISODE_STEPS),
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            theta_dot: 0.0,
            step_count: 0,
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    pub fn state(&self) -> (f64, f64, f64, f64) {
        (self.x, self.x_dot, self.theta, self.theta_dot)
    }

    pub fn set_state(&mut self, x: f64, x_dot: f64, theta: f64, theta_dot: f64) {
        self.x = x.clamp(-TRACK_HALF_LENGTH, TRACK_HALF_LENGTH);
        self.x_dot = x_dot.clamp(-MAX_CART_SPEED, MAX_CART_SPEED);
        self.theta = wrap_angle(theta);
        self.theta_dot = theta_dot.clamp(-MAX_ANG_SPEED, MAX_ANG_SPEED);
        self.step_count = 0;
    }
}

impl Default for CartpoleSwingup {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartpoleSwingup {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        // Draw order: x, x_dot, theta offset from hanging, theta_dot.
        self.x = rng.random_range(-0.05..0.05);
        self.x_dot = rng.random_range(-0.05..0.05);
        self.theta = wrap_angle(std::f64::consts::PI + rng.random_range(-0.05..0.05));
        self.theta_dot = rng.random_range(-0.05..0.05);
        self.step_count = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        check_action(action, &self.spec);
        assert!(self.step_count < EPISODE_STEPS, "stepping past the episode limit without reset");
        let force = action[0].clamp(-MAX_FORCE, MAX_FORCE);

        let angle_err = wrap_angle(self.theta);
        let reward = -(angle_err * angle_err
            + 0.1 * self.theta_dot * self.theta_dot
            + 0.05 * self.x * self.x
            + 0.001 * force * force);

        let total_mass = CART_MASS + POLE_MASS;
        let sin = self.theta.sin();
        let cos = self.theta.cos();
        let temp = (force + POLE_MASS * POLE_HALF_LENGTH * self.theta_dot * self.theta_dot * sin)
            / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * theta_acc * cos / total_mass;

        self.theta_dot = (self.theta_dot + DT * theta_acc).clamp(-MAX_ANG_SPEED, MAX_ANG_SPEED);
        self.x_dot = (self.x_dot + DT * x_acc).clamp(-MAX_CART_SPEED, MAX_CART_SPEED);
        self.theta = wrap_angle(self.theta + DT * self.theta_dot);
        self.x += DT * self.x_dot;
        if self.x.abs() > TRACK_HALF_LENGTH {
            self.x = self.x.clamp(-TRACK_HALF_LENGTH, TRACK_HALF_LENGTH);
            self.x_dot = 0.0;
        }
        self.step_count += 1;

        StepResult {
            observation: self.observation(),
            reward,
            terminal: false,
            truncated: self.step_count >= EPISODE_STEPS,
        }
    }

    fn clone_env(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
