//! Actors: the tanh-squashed Gaussian policy used by the stochastic agents
//! and the tanh deterministic policy used by TD3/DDPG.
//!
//! The squashed Gaussian samples u = μ(s) + σ(s)·ε with ε ~ N(0, I), emits
//! a = scale·tanh(u) + offset, and computes the exact log-density with the
//! change-of-variables correction in the numerically stable form
//! log(1 − tanh²(u)) = 2·(log 2 − u − softplus(−2u)).
//! Backpropagation through the sample keeps ε fixed (reparameterization).

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::nnet::{Activation, ForwardCache, Matrix, Mlp, MlpGrads};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// tanh outputs are clamped to ±(1 − 1e-12) so scaled actions stay strictly
/// inside the bounds even when tanh saturates to ±1.0 in f64.
const TANH_BOUND: f64 = 1.0 - 1e-12;

const HALF_LOG_TWO_PI: f64 = 0.9189385332046727;

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// log(1 − tanh²(u)) without catastrophic cancellation for large |u|.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn affine_params(low: &[f64], high: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(low.len(), high.len());
    assert!(!low.is_empty());
    let scale: Vec<f64> = low.iter().zip(high).map(|(&l, &h)| {
        assert!(h > l, "action bounds must satisfy high > low");
        (h - l) / 2.0
    }).collect();
    let offset: Vec<f64> = low.iter().zip(high).map(|(&l, &h)| (h + l) / 2.0).collect();
    (scale, offset)
}

/// Everything needed to backpropagate through one reparameterized sample.
pub struct SampleCache {
    trunk: ForwardCache,
    mean: ForwardCache,
    log_std: ForwardCache,
    raw_log_std: Matrix,
    sigma: Matrix,
    eps: Matrix,
    tanh_u: Matrix,
}

#[derive(Clone, Debug)]
pub struct ActorGrads {
    pub trunk: MlpGrads,
    pub mean: MlpGrads,
    pub log_std: MlpGrads,
}

#[derive(Clone, Debug)]
pub struct SquashedGaussianActor {
    pub trunk: Mlp,
    pub mean_head: Mlp,
    pub log_std_head: Mlp,
    pub action_scale: Vec<f64>,
    pub action_offset: Vec<f64>,
}

impl SquashedGaussianActor {
    /// Parameter draw order: trunk, then mean head, then log-std head.
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden_sizes: &[usize],
        action_low: &[f64],
        action_high: &[f64],
        rng: &mut dyn RngCore,
    ) -> Self {
        assert!(!hidden_sizes.is_empty(), "actor needs at least one hidden layer");
        assert_eq!(action_low.len(), act_dim);
        let mut trunk_sizes = vec![obs_dim];
        trunk_sizes.extend_from_slice(hidden_sizes);
        let feat = *hidden_sizes.last().unwrap();
        let trunk = Mlp::new(&trunk_sizes, Activation::Relu, Activation::Relu, rng);
        let mean_head = Mlp::new(&[feat, act_dim], Activation::Relu, Activation::Identity, rng);
        let log_std_head = Mlp::new(&[feat, act_dim], Activation::Relu, Activation::Identity, rng);
        let (action_scale, action_offset) = affine_params(action_low, action_high);
        SquashedGaussianActor { trunk, mean_head, log_std_head, action_scale, action_offset }
    }

    pub fn act_dim(&self) -> usize {
        self.action_scale.len()
    }

    /// Draws ε ~ N(0, I) row by row, then defers to `sample_with_noise`.
    pub fn sample(
        &self,
        states: &Matrix,
        rng: &mut dyn RngCore,
    ) -> (Matrix, Vec<f64>, SampleCache) {
        let eps = Matrix::from_fn(states.rows(), self.act_dim(), |_, _| rng.sample(StandardNormal));
        self.sample_with_noise(states, &eps)
    }

    /// Reparameterized sample with caller-supplied noise (ε held fixed for
    /// finite-difference checks). Returns (actions, per-row log π, cache).
    pub fn sample_with_noise(
        &self,
        states: &Matrix,
        eps: &Matrix,
    ) -> (Matrix, Vec<f64>, SampleCache) {
        let n = states.rows();
        let k = self.act_dim();
        assert_eq!(eps.rows(), n);
        assert_eq!(eps.cols(), k);

        let (feat, trunk_cache) = self.trunk.forward(states);
        let (mu, mean_cache) = self.mean_head.forward(&feat);
        let (raw_log_std, ls_cache) = self.log_std_head.forward(&feat);

        let sigma = raw_log_std.map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX).exp());
        let mut actions = Matrix::zeros(n, k);
        let mut tanh_u = Matrix::zeros(n, k);
        let mut log_probs = vec![0.0; n];
        for i in 0..n {
            let mut lp = 0.0;
            for j in 0..k {
                let s = sigma.get(i, j);
                let e = eps.get(i, j);
                let u = mu.get(i, j) + s * e;
                let t = u.tanh().clamp(-TANH_BOUND, TANH_BOUND);
                tanh_u.set(i, j, t);
                actions.set(i, j, self.action_scale[j] * t + self.action_offset[j]);
                lp += -HALF_LOG_TWO_PI - s.ln() - 0.5 * e * e
                    - self.action_scale[j].ln()
                    - log_one_minus_tanh_sq(u);
            }
            log_probs[i] = lp;
        }

        let cache = SampleCache {
            trunk: trunk_cache,
            mean: mean_cache,
            log_std: ls_cache,
            raw_log_std,
            sigma,
            eps: eps.clone(),
            tanh_u,
        };
        (actions, log_probs, cache)
    }

    /// Exact log-density of the squashed action corresponding to the
    /// unsquashed value `u`, evaluated at a single state.
    pub fn log_prob(&self, state: &[f64], u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.act_dim());
        let feat = self.trunk.forward_output(&Matrix::from_row(state));
        let mu = self.mean_head.forward_output(&feat);
        let raw_ls = self.log_std_head.forward_output(&feat);
        let mut lp = 0.0;
        for j in 0..u.len() {
            let ls = raw_ls.get(0, j).clamp(LOG_STD_MIN, LOG_STD_MAX);
            let sigma = ls.exp();
            let z = (u[j] - mu.get(0, j)) / sigma;
            lp += -HALF_LOG_TWO_PI - ls - 0.5 * z * z
                - self.action_scale[j].ln()
                - log_one_minus_tanh_sq(u[j]);
        }
        lp
    }

    /// Mean action scale·tanh(μ(s)) + offset; consumes no rng.
    pub fn deterministic_action(&self, state: &[f64]) -> Vec<f64> {
        let feat = self.trunk.forward_output(&Matrix::from_row(state));
        let mu = self.mean_head.forward_output(&feat);
        (0..self.act_dim())
            .map(|j| {
                let t = mu.get(0, j).tanh().clamp(-TANH_BOUND, TANH_BOUND);
                self.action_scale[j] * t + self.action_offset[j]
            })
            .collect()
    }

    /// Gradients of Σᵢⱼ d_action[i,j]·a[i,j] + Σᵢ d_logp[i]·log π[i] with
    /// respect to the actor parameters, with ε fixed.
    ///
    /// Per element, with t = tanh(u): da/du = scale·(1 − t²) and
    /// dlogπ/du = 2t (the Gaussian part is constant in u under the
    /// reparameterization), so du = d_logp·2t + d_action·scale·(1 − t²),
    /// dμ = du, and d(log σ) = du·σ·ε − d_logp, masked to zero where the raw
    /// log-std sits outside the open clamp interval.
    pub fn backprop_sample(
        &self,
        cache: &SampleCache,
        d_action: &Matrix,
        d_logp: &[f64],
    ) -> ActorGrads {
        let n = cache.eps.rows();
        let k = cache.eps.cols();
        assert_eq!(d_action.rows(), n);
        assert_eq!(d_action.cols(), k);
        assert_eq!(d_logp.len(), n);

        let mut d_mu = Matrix::zeros(n, k);
        let mut d_ls = Matrix::zeros(n, k);
        for i in 0..n {
            for j in 0..k {
                let t = cache.tanh_u.get(i, j);
                let du = d_logp[i] * 2.0 * t
                    + d_action.get(i, j) * self.action_scale[j] * (1.0 - t * t);
                d_mu.set(i, j, du);
                let raw = cache.raw_log_std.get(i, j);
                let inside = raw > LOG_STD_MIN && raw < LOG_STD_MAX;
                if inside {
                    let se = cache.sigma.get(i, j) * cache.eps.get(i, j);
                    d_ls.set(i, j, du * se - d_logp[i]);
                }
            }
        }

        let (mean_grads, d_feat_mean) = self.mean_head.backward_with_input(&cache.mean, &d_mu);
        let (ls_grads, mut d_feat) = self.log_std_head.backward_with_input(&cache.log_std, &d_ls);
        d_feat.add_assign(&d_feat_mean);
        let trunk_grads = self.trunk.backward(&cache.trunk, &d_feat);
        ActorGrads { trunk: trunk_grads, mean: mean_grads, log_std: ls_grads }
    }
}

#[derive(Clone, Debug)]
pub struct DeterministicActor {
    pub net: Mlp,
    pub action_scale: Vec<f64>,
    pub action_offset: Vec<f64>,
    pub exploration_noise_std: f64,
}

impl DeterministicActor {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden_sizes: &[usize],
        action_low: &[f64],
        action_high: &[f64],
        exploration_noise_std: f64,
        rng: &mut dyn RngCore,
    ) -> Self {
        assert!(exploration_noise_std >= 0.0);
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden_sizes);
        sizes.push(act_dim);
        let net = Mlp::new(&sizes, Activation::Relu, Activation::Tanh, rng);
        let (action_scale, action_offset) = affine_params(action_low, action_high);
        DeterministicActor { net, action_scale, action_offset, exploration_noise_std }
    }

    pub fn act_dim(&self) -> usize {
        self.action_scale.len()
    }

    /// Batch of scaled actions plus the cache for `backprop`.
    pub fn forward_batch(&self, states: &Matrix) -> (Matrix, ForwardCache) {
        let (t, cache) = self.net.forward(states);
        let actions = Matrix::from_fn(t.rows(), t.cols(), |i, j| {
            self.action_scale[j] * t.get(i, j) + self.action_offset[j]
        });
        (actions, cache)
    }

    /// Gradients of Σᵢⱼ d_action[i,j]·a[i,j] w.r.t. the net parameters.
    pub fn backprop(&self, cache: &ForwardCache, d_action: &Matrix) -> MlpGrads {
        let d_tanh = Matrix::from_fn(d_action.rows(), d_action.cols(), |i, j| {
            d_action.get(i, j) * self.action_scale[j]
        });
        self.net.backward(cache, &d_tanh)
    }

    pub fn deterministic_action(&self, state: &[f64]) -> Vec<f64> {
        let out = self.net.forward_output(&Matrix::from_row(state));
        (0..self.act_dim())
            .map(|j| self.action_scale[j] * out.get(0, j) + self.action_offset[j])
            .collect()
    }

    /// Deterministic action plus N(0, std·scale) exploration noise per
    /// dimension, clipped back to the action bounds.
    pub fn noisy_action(&self, state: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let mut a = self.deterministic_action(state);
        for j in 0..a.len() {
            let noise: f64 = rng.sample(StandardNormal);
            let low = self.action_offset[j] - self.action_scale[j];
            let high = self.action_offset[j] + self.action_scale[j];
            a[j] = (a[j] + self.exploration_noise_std * self.action_scale[j] * noise)
                .clamp(low, high);
        }
        a
    }
}
