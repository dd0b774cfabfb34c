//! Torque-limited pendulum swing-up.
//!
//! A unit point mass on a massless unit rod, angle measured from upright
//! (theta = 0 is the goal). The motor torque is too weak to lift the mass
//! directly, so the pendulum has to pump energy over several swings. The
//! dynamics use one semi-implicit Euler step per call, plus a linear damping
//! term sized so that a zero-torque step never increases mechanical energy
//! anywhere in the clamped state space (see the energy test).

use rand::{Rng, RngCore};

use super::{check_action, wrap_angle, EnvSpec, Environment, StepResult};

pub const DT: f64 = 0.05;
pub const GRAVITY: f64 = 9.81;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DAMPING: f64 = 0.25;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;
pub const EPISODE_STEPS: usize = 200;

#[derive(Clone, Debug)]
pub struct PendulumSwingup {
    spec: EnvSpec,
    theta: f64,
    omega: f64,
    step_count: usize,
}

impl PendulumSwingup {
    pub fn new() -> Self {
        PendulumSwingup {
            spec: EnvSpec::new(3, 1, vec![-MAX_TORQUE], vec![MAX_TORQUE], EPISODE_STEPS),
            theta: 0.0,
            omega: 0.0,
            step_count: 0,
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.omega]
    }

    /// Physics state (theta, omega); exposed for the integrator oracle tests.
    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.omega)
    }

    pub fn set_state(&mut self, theta: f64, omega: f64) {
        self.theta = wrap_angle(theta);
        self.omega = omega.clamp(-MAX_SPEED, MAX_SPEED);
        self.step_count = 0;
    }

    /// Mechanical energy ½·m·l²·ω² + m·g·l·cos(θ) of the current state.
    pub fn energy(&self) -> f64 {
        0.5 * MASS * LENGTH * LENGTH * self.omega * self.omega
            + MASS * GRAVITY * LENGTH * self.theta.cos()
    }
}

impl Default for PendulumSwingup {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PendulumSwingup {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        self.omega = rng.random_range(-1.0..1.0);
        self.step_count = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> StepResult {
        check_action(action, &self.spec);
        assert!(self.step_count < EPISODE_STEPS, "stepping past the episode limit without reset");
        let u = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);

        // Cost of the state the agent acted in, before integrating.
        let angle_err = wrap_angle(self.theta);
        let reward = -(angle_err * angle_err + 0.1 * self.omega * self.omega + 0.001 * u * u);

        let inertia = MASS * LENGTH * LENGTH;
        let accel = (GRAVITY / LENGTH) * self.theta.sin() + u / inertia - DAMPING * self.omega / inertia;
        self.omega = (self.omega + DT * accel).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta = wrap_angle(self.theta + DT * self.omega);
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
