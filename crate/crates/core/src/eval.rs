//! Test-return evaluation, the Q-Error critic diagnostic, and multi-seed
//! curve aggregation.

use rand::RngCore;
use thiserror::Error;

use crate::envs::Environment;

/// Deterministic test-time policy: no rng is ever consumed for actions.
pub trait Policy {
    fn act(&self, obs: &[f64]) -> Vec<f64>;
}

/// State-action value used by the Q-Error diagnostic (min over twin critics
/// where two exist).
pub trait ActionValue {
    fn q_min(&self, obs: &[f64], action: &[f64]) -> f64;
}

#[derive(Clone, Debug)]
pub struct EvalRecord {
    pub env_step: usize,
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub std_return: f64,
}

#[derive(Clone, Debug)]
pub struct QErrorRecord {
    pub env_step: usize,
    pub q_error: f64,
}

/// One metric traced over training for one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedCurve {
    pub env_steps: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CurveAggregate {
    pub env_steps: Vec<usize>,
    pub per_seed: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("no seed curves to aggregate")]
    Empty,
    #[error("seed curves have misaligned env_step grids")]
    MisalignedGrids,
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `n_episodes` full episodes with deterministic actions; rng is used
/// only to seed the environment resets.
pub fn evaluate_policy(
    env: &mut dyn Environment,
    policy: &dyn Policy,
    n_episodes: usize,
    rng: &mut dyn RngCore,
    env_step: usize,
) -> EvalRecord {
    assert!(n_episodes >= 1);
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut obs = env.reset(rng);
        let mut total = 0.0;
        loop {
            let action = policy.act(&obs);
            let sr = env.step(&action);
            total += sr.reward;
            obs = sr.observation;
            if sr.terminal || sr.truncated {
                break;
            }
        }
        returns.push(total);
    }
    let (mean_return, std_return) = mean_and_population_std(&returns);
    EvalRecord { env_step, returns, mean_return, std_return }
}

/// Mean squared difference between the Monte Carlo return of the
/// deterministic policy and Q(s₀, a₀), over `n_episodes` fresh episodes.
/// The return G₀ = Σ_t γᵗ·r_t uses plain environment rewards.
pub fn q_error(
    env: &mut dyn Environment,
    policy: &dyn Policy,
    value: &dyn ActionValue,
    gamma: f64,
    n_episodes: usize,
    rng: &mut dyn RngCore,
    env_step: usize,
) -> QErrorRecord {
    assert!(n_episodes >= 1);
    let mut total_sq = 0.0;
    for _ in 0..n_episodes {
        let s0 = env.reset(rng);
        let a0 = policy.act(&s0);
        let q0 = value.q_min(&s0, &a0);
        let mut g = 0.0;
        let mut discount = 1.0;
        let mut action = a0;
        let mut obs;
        loop {
            let sr = env.step(&action);
            g += discount * sr.reward;
            discount *= gamma;
            obs = sr.observation;
            if sr.terminal || sr.truncated {
                break;
            }
            action = policy.act(&obs);
        }
        total_sq += (g - q0) * (g - q0);
    }
    QErrorRecord { env_step, q_error: total_sq / n_episodes as f64 }
}

/// Pointwise mean and population standard deviation across seeds.
pub fn aggregate_seeds(curves: &[SeedCurve]) -> Result<CurveAggregate, AggregateError> {
    let first = curves.first().ok_or(AggregateError::Empty)?;
    for c in curves {
        if c.env_steps != first.env_steps || c.values.len() != c.env_steps.len() {
            return Err(AggregateError::MisalignedGrids);
        }
    }
    let len = first.env_steps.len();
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for i in 0..len {
        let column: Vec<f64> = curves.iter().map(|c| c.values[i]).collect();
        let (m, s) = mean_and_population_std(&column);
        mean.push(m);
        std.push(s);
    }
    Ok(CurveAggregate {
        env_steps: first.env_steps.clone(),
        per_seed: curves.iter().map(|c| c.values.clone()).collect(),
        mean,
        std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvSpec, StepResult};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Three-step toy chain: reward = base + t, terminal after 3 steps.
    #[derive(Clone)]
    struct ToyEnv {
        spec: EnvSpec,
        base: f64,
        t: usize,
    }

    impl ToyEnv {
        fn new() -> Self {
            ToyEnv { spec: EnvSpec::new(1, 1, vec![-1.0], vec![1.0], 3), base: 0.0, t: 0 }
        }
    }

    impl Environment for ToyEnv {
        fn spec(&self) -> &EnvSpec {
            &self.spec
        }

        fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
            self.base = rng.random_range(0.0..1.0);
            self.t = 0;
            vec![self.base]
        }

        fn step(&mut self, action: &[f64]) -> StepResult {
            let reward = self.base + self.t as f64 + 0.1 * action[0];
            self.t += 1;
            StepResult {
                observation: vec![self.base + self.t as f64],
                reward,
                terminal: false,
                truncated: self.t >= 3,
            }
        }

        fn clone_env(&self) -> Box<dyn Environment> {
            Box::new(self.clone())
        }
    }

    struct HalfObs;

    impl Policy for HalfObs {
        fn act(&self, obs: &[f64]) -> Vec<f64> {
            vec![(obs[0] * 0.5).clamp(-1.0, 1.0)]
        }
    }

    struct ConstQ(f64);

    impl ActionValue for ConstQ {
        fn q_min(&self, _obs: &[f64], _action: &[f64]) -> f64 {
            self.0
        }
    }

    #[test]
    fn single_episode_has_zero_std() {
        let mut env = ToyEnv::new();
        let rec = evaluate_policy(&mut env, &HalfObs, 1, &mut ChaCha8Rng::seed_from_u64(0), 42);
        assert_eq!(rec.env_step, 42);
        assert_eq!(rec.returns.len(), 1);
        assert_eq!(rec.std_return, 0.0);
        assert_eq!(rec.mean_return, rec.returns[0]);
    }

    #[test]
    fn evaluation_is_deterministic_given_the_reset_rng() {
        let mut env = ToyEnv::new();
        let r1 = evaluate_policy(&mut env, &HalfObs, 5, &mut ChaCha8Rng::seed_from_u64(3), 0);
        let r2 = evaluate_policy(&mut env, &HalfObs, 5, &mut ChaCha8Rng::seed_from_u64(3), 0);
        assert_eq!(r1.returns, r2.returns);
        assert_eq!(r1.mean_return.to_bits(), r2.mean_return.to_bits());
    }

    #[test]
    fn mean_and_std_are_consistent_with_the_returns() {
        let mut env = ToyEnv::new();
        let rec = evaluate_policy(&mut env, &HalfObs, 10, &mut ChaCha8Rng::seed_from_u64(7), 0);
        let mean = rec.returns.iter().sum::<f64>() / 10.0;
        let var = rec.returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / 10.0;
        assert!((rec.mean_return - mean).abs() < 1e-12);
        assert!((rec.std_return - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn q_error_matches_a_hand_rolled_oracle() {
        let gamma = 0.9;
        let q_const = 1.7;
        let mut env = ToyEnv::new();
        let rec = q_error(
            &mut env,
            &HalfObs,
            &ConstQ(q_const),
            gamma,
            6,
            &mut ChaCha8Rng::seed_from_u64(11),
            0,
        );

        // Independent oracle: replay the same episodes directly.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut expected = 0.0;
        for _ in 0..6 {
            let mut env2 = ToyEnv::new();
            let s0 = env2.reset(&mut rng);
            let mut g = 0.0;
            let mut obs = s0;
            for t in 0..3 {
                let a = HalfObs.act(&obs);
                let sr = env2.step(&a);
                g += gamma.powi(t) * sr.reward;
                obs = sr.observation;
            }
            expected += (g - q_const) * (g - q_const);
        }
        expected /= 6.0;
        assert!((rec.q_error - expected).abs() < 1e-10, "{} vs {expected}", rec.q_error);
    }

    #[test]
    fn q_error_is_zero_when_the_critic_equals_the_return() {
        // With gamma=0, G₀ = r₀ = base (first reward, action term included).
        struct ZeroAct;
        impl Policy for ZeroAct {
            fn act(&self, _obs: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
        }
        struct FirstReward;
        impl ActionValue for FirstReward {
            fn q_min(&self, obs: &[f64], _action: &[f64]) -> f64 {
                obs[0]
            }
        }
        let mut env = ToyEnv::new();
        let rec = q_error(
            &mut env,
            &ZeroAct,
            &FirstReward,
            0.0,
            4,
            &mut ChaCha8Rng::seed_from_u64(5),
            0,
        );
        assert!(rec.q_error < 1e-24, "q_error {}", rec.q_error);
    }

    #[test]
    fn aggregate_of_two_constant_seeds() {
        let c0 = SeedCurve { env_steps: vec![10, 20], values: vec![0.0, 0.0] };
        let c2 = SeedCurve { env_steps: vec![10, 20], values: vec![2.0, 2.0] };
        let agg = aggregate_seeds(&[c0, c2]).unwrap();
        assert_eq!(agg.mean, vec![1.0, 1.0]);
        assert_eq!(agg.std, vec![1.0, 1.0]);
    }

    #[test]
    fn single_seed_aggregates_to_itself_with_zero_std() {
        let c = SeedCurve { env_steps: vec![1, 2, 3], values: vec![5.0, -1.0, 0.25] };
        let agg = aggregate_seeds(std::slice::from_ref(&c)).unwrap();
        assert_eq!(agg.mean, c.values);
        assert_eq!(agg.std, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn aggregation_is_permutation_invariant() {
        let a = SeedCurve { env_steps: vec![1, 2], values: vec![3.0, 1.0] };
        let b = SeedCurve { env_steps: vec![1, 2], values: vec![-1.0, 4.0] };
        let c = SeedCurve { env_steps: vec![1, 2], values: vec![0.5, 2.0] };
        let agg1 = aggregate_seeds(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let agg2 = aggregate_seeds(&[c, a, b]).unwrap();
        assert_eq!(agg1.mean, agg2.mean);
        assert_eq!(agg1.std, agg2.std);
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        let a = SeedCurve { env_steps: vec![1, 2], values: vec![0.0, 0.0] };
        let b = SeedCurve { env_steps: vec![1, 3], values: vec![0.0, 0.0] };
        assert!(matches!(aggregate_seeds(&[a, b]), Err(AggregateError::MisalignedGrids)));
        assert!(matches!(aggregate_seeds(&[]), Err(AggregateError::Empty)));
    }
}
