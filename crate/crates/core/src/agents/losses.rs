//! Critic and actor losses.
//!
//! The critic objective is MSE-to-target plus an optional retrospective
//! regularizer: for each transition, with ŷ_t the current critic's prediction
//! and ŷ_p the previous (snapshot) critic's prediction of the same input,
//!
//!   L_ret = mean[ (κ+1)·|y − ŷ_t| − κ·|ŷ_t − ŷ_p| ]
//!   L     = L_mse + λ_ret·L_ret
//!
//! d is the L¹ metric on the scalar critic outputs. No gradient flows through
//! y or ŷ_p; the L¹ subgradient at a tie is 0. L_ret may be negative and is
//! never clamped.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::nnet::{Matrix, Mlp, MlpGrads};
use crate::policy::{ActorGrads, DeterministicActor, SquashedGaussianActor};
use crate::replay::Batch;

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn critic_input(batch: &Batch) -> Matrix {
    batch.s.hstack(&batch.a)
}

/// One row of the soft critic target:
/// y = r + γ·(1−d)·(min_q − α·log π).
pub fn critic_target_element(
    r: f64,
    gamma: f64,
    d: f64,
    min_q: f64,
    alpha: f64,
    log_pi: f64,
) -> f64 {
    r + gamma * (1.0 - d) * (min_q - alpha * log_pi)
}

/// Soft twin-critic targets: ã′ is sampled fresh from the actor at s′ and the
/// target networks are evaluated at (s′, ã′). The result carries no gradient.
pub fn compute_critic_target(
    batch: &Batch,
    actor: &SquashedGaussianActor,
    q1_targ: &Mlp,
    q2_targ: &Mlp,
    alpha: f64,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> Vec<f64> {
    let (a_next, log_pi, _) = actor.sample(&batch.s_next, rng);
    let x_next = batch.s_next.hstack(&a_next);
    let q1 = q1_targ.forward_output(&x_next);
    let q2 = q2_targ.forward_output(&x_next);
    (0..batch.len())
        .map(|i| {
            let min_q = q1.get(i, 0).min(q2.get(i, 0));
            critic_target_element(batch.r[i], gamma, batch.d[i], min_q, alpha, log_pi[i])
        })
        .collect()
}

/// Mean squared error of the critic against fixed targets, with gradients
/// with respect to the critic parameters only.
pub fn mse_critic_loss(critic: &Mlp, batch: &Batch, targets: &[f64]) -> (f64, MlpGrads) {
    let n = batch.len();
    assert_eq!(targets.len(), n);
    let x = critic_input(batch);
    let (q, cache) = critic.forward(&x);
    let (loss, d_q) = mse_from_predictions(&q, targets);
    (loss, critic.backward(&cache, &d_q))
}

fn mse_from_predictions(q: &Matrix, targets: &[f64]) -> (f64, Matrix) {
    let n = targets.len();
    let mut loss = 0.0;
    let mut d_q = Matrix::zeros(n, 1);
    for i in 0..n {
        let diff = q.get(i, 0) - targets[i];
        loss += diff * diff;
        d_q.set(i, 0, 2.0 * diff / n as f64);
    }
    (loss / n as f64, d_q)
}

/// The retrospective regularizer of the critic against the frozen previous
/// snapshot. ŷ_p is a constant; gradients flow only through ŷ_t.
pub fn retrospective_regularizer(
    critic: &Mlp,
    critic_prev: &Mlp,
    batch: &Batch,
    targets: &[f64],
    kappa: f64,
) -> (f64, MlpGrads) {
    let n = batch.len();
    assert_eq!(targets.len(), n);
    assert!(kappa > 0.0, "kappa must be strictly positive");
    let x = critic_input(batch);
    let (q, cache) = critic.forward(&x);
    let q_prev = critic_prev.forward_output(&x);
    let (loss, d_q) = retrospective_from_predictions(&q, &q_prev, targets, kappa);
    (loss, critic.backward(&cache, &d_q))
}

fn retrospective_from_predictions(
    q: &Matrix,
    q_prev: &Matrix,
    targets: &[f64],
    kappa: f64,
) -> (f64, Matrix) {
    let n = targets.len();
    let mut loss = 0.0;
    let mut d_q = Matrix::zeros(n, 1);
    for i in 0..n {
        let yt = q.get(i, 0);
        let yp = q_prev.get(i, 0);
        let y = targets[i];
        loss += (kappa + 1.0) * (y - yt).abs() - kappa * (yt - yp).abs();
        d_q.set(i, 0, ((kappa + 1.0) * sgn(yt - y) - kappa * sgn(yt - yp)) / n as f64);
    }
    (loss / n as f64, d_q)
}

#[derive(Clone, Debug)]
pub struct CriticLossOut {
    pub total: f64,
    pub mse: f64,
    pub ret: f64,
    pub grads: MlpGrads,
}

/// Full critic loss L_mse + λ_ret·L_ret sharing a single forward pass.
/// λ_ret = 0 takes the pure-MSE path — bitwise identical to
/// `mse_critic_loss` and the previous critic is never evaluated.
pub fn total_retrospective_loss(
    critic: &Mlp,
    critic_prev: &Mlp,
    batch: &Batch,
    targets: &[f64],
    kappa: f64,
    lambda_ret: f64,
) -> CriticLossOut {
    let n = batch.len();
    assert_eq!(targets.len(), n);
    let x = critic_input(batch);
    let (q, cache) = critic.forward(&x);
    let (mse, d_q_mse) = mse_from_predictions(&q, targets);
    if lambda_ret == 0.0 {
        let grads = critic.backward(&cache, &d_q_mse);
        return CriticLossOut { total: mse, mse, ret: 0.0, grads };
    }
    let q_prev = critic_prev.forward_output(&x);
    let (ret, d_q_ret) = retrospective_from_predictions(&q, &q_prev, targets, kappa);
    let mut grads = critic.backward(&cache, &d_q_mse);
    let ret_grads = critic.backward(&cache, &d_q_ret);
    grads.add_scaled(&ret_grads, lambda_ret);
    CriticLossOut { total: mse + lambda_ret * ret, mse, ret, grads }
}

#[derive(Debug)]
pub struct ActorLossOut {
    pub loss: f64,
    pub grads: ActorGrads,
    pub mean_q: f64,
    pub mean_log_prob: f64,
}

/// SAC policy loss mean[α·log π(ã|s) − min_i Q_i(s, ã)] with ã reparameterized;
/// the critics are frozen (gradients flow through their inputs only).
pub fn sac_actor_loss(
    actor: &SquashedGaussianActor,
    q1: &Mlp,
    q2: &Mlp,
    states: &Matrix,
    alpha: f64,
    rng: &mut dyn RngCore,
) -> ActorLossOut {
    let eps = Matrix::from_fn(states.rows(), actor.act_dim(), |_, _| rng.sample(StandardNormal));
    sac_actor_loss_with_noise(actor, q1, q2, states, alpha, &eps)
}

/// SAC policy loss with caller-supplied ε, for finite-difference checks.
pub fn sac_actor_loss_with_noise(
    actor: &SquashedGaussianActor,
    q1: &Mlp,
    q2: &Mlp,
    states: &Matrix,
    alpha: f64,
    eps: &Matrix,
) -> ActorLossOut {
    let n = states.rows();
    let obs_dim = states.cols();
    let act_dim = actor.act_dim();
    let (actions, log_probs, cache) = actor.sample_with_noise(states, eps);
    let x = states.hstack(&actions);
    let (q1v, c1) = q1.forward(&x);
    let (q2v, c2) = q2.forward(&x);

    let mut loss = 0.0;
    let mut mean_q = 0.0;
    let mut d_q1 = Matrix::zeros(n, 1);
    let mut d_q2 = Matrix::zeros(n, 1);
    for i in 0..n {
        let (a, b) = (q1v.get(i, 0), q2v.get(i, 0));
        let min_q = a.min(b);
        loss += alpha * log_probs[i] - min_q;
        mean_q += min_q;
        // The min routes the gradient to exactly one critic; ties go to q1.
        if a <= b {
            d_q1.set(i, 0, -1.0 / n as f64);
        } else {
            d_q2.set(i, 0, -1.0 / n as f64);
        }
    }
    loss /= n as f64;
    mean_q /= n as f64;
    let mean_log_prob = log_probs.iter().sum::<f64>() / n as f64;

    let dx1 = q1.backward_input_only(&c1, &d_q1);
    let mut dx = q2.backward_input_only(&c2, &d_q2);
    dx.add_assign(&dx1);
    let d_action = Matrix::from_fn(n, act_dim, |i, j| dx.get(i, obs_dim + j));
    let d_logp = vec![alpha / n as f64; n];
    let grads = actor.backprop_sample(&cache, &d_action, &d_logp);
    ActorLossOut { loss, grads, mean_q, mean_log_prob }
}

/// TD3 target: smoothed target-policy action, clipped noise, clipped double-Q.
pub fn td3_target(
    batch: &Batch,
    actor_targ: &DeterministicActor,
    q1_targ: &Mlp,
    q2_targ: &Mlp,
    gamma: f64,
    target_noise_std: f64,
    target_noise_clip: f64,
    rng: &mut dyn RngCore,
) -> Vec<f64> {
    let (a_det, _) = actor_targ.forward_batch(&batch.s_next);
    let a_next = Matrix::from_fn(a_det.rows(), a_det.cols(), |i, j| {
        let scale = actor_targ.action_scale[j];
        let offset = actor_targ.action_offset[j];
        let noise: f64 = rng.sample(StandardNormal);
        let smoothing = (target_noise_std * scale * noise)
            .clamp(-target_noise_clip * scale, target_noise_clip * scale);
        (a_det.get(i, j) + smoothing).clamp(offset - scale, offset + scale)
    });
    let x_next = batch.s_next.hstack(&a_next);
    let q1 = q1_targ.forward_output(&x_next);
    let q2 = q2_targ.forward_output(&x_next);
    (0..batch.len())
        .map(|i| {
            let min_q = q1.get(i, 0).min(q2.get(i, 0));
            batch.r[i] + gamma * (1.0 - batch.d[i]) * min_q
        })
        .collect()
}

/// DDPG target: y = r + γ·(1−d)·Q_targ(s′, μ_targ(s′)).
pub fn ddpg_target(
    batch: &Batch,
    actor_targ: &DeterministicActor,
    q_targ: &Mlp,
    gamma: f64,
) -> Vec<f64> {
    let (a_next, _) = actor_targ.forward_batch(&batch.s_next);
    let x_next = batch.s_next.hstack(&a_next);
    let q = q_targ.forward_output(&x_next);
    (0..batch.len())
        .map(|i| batch.r[i] + gamma * (1.0 - batch.d[i]) * q.get(i, 0))
        .collect()
}

/// Deterministic policy loss −mean Q(s, μ(s)) against a frozen critic.
pub fn deterministic_actor_loss(
    actor: &DeterministicActor,
    q: &Mlp,
    states: &Matrix,
) -> (f64, MlpGrads, f64) {
    let n = states.rows();
    let obs_dim = states.cols();
    let (actions, cache) = actor.forward_batch(states);
    let x = states.hstack(&actions);
    let (qv, qc) = q.forward(&x);
    let mean_q = qv.as_slice().iter().sum::<f64>() / n as f64;
    let d_q = Matrix::from_fn(n, 1, |_, _| -1.0 / n as f64);
    let dx = q.backward_input_only(&qc, &d_q);
    let d_action = Matrix::from_fn(n, actor.act_dim(), |i, j| dx.get(i, obs_dim + j));
    let grads = actor.backprop(&cache, &d_action);
    (-mean_q, grads, mean_q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Activation, FD_STEP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Critic over (s, a) with obs_dim = act_dim = 1 computing w·s + v·a + b.
    fn affine_critic(w: f64, v: f64, b: f64) -> Mlp {
        let mut m = Mlp::new(
            &[2, 1],
            Activation::Relu,
            Activation::Identity,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        m.set_param(0, w);
        m.set_param(1, v);
        m.set_param(2, b);
        m
    }

    fn batch_1d(s: &[f64], a: &[f64], r: &[f64], d: &[f64]) -> Batch {
        let n = s.len();
        Batch {
            s: Matrix::from_fn(n, 1, |i, _| s[i]),
            a: Matrix::from_fn(n, 1, |i, _| a[i]),
            r: r.to_vec(),
            s_next: Matrix::from_fn(n, 1, |i, _| s[i]),
            d: d.to_vec(),
        }
    }

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, obs: usize, act: usize) -> Batch {
        Batch {
            s: Matrix::from_fn(n, obs, |_, _| rng.random_range(-1.0..1.0)),
            a: Matrix::from_fn(n, act, |_, _| rng.random_range(-1.0..1.0)),
            r: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            s_next: Matrix::from_fn(n, obs, |_, _| rng.random_range(-1.0..1.0)),
            d: (0..n).map(|_| if rng.random_range(0.0..1.0) < 0.2 { 1.0 } else { 0.0 }).collect(),
        }
    }

    fn fd_critic_check(
        critic: &mut Mlp,
        analytic: &MlpGrads,
        mut loss_fn: impl FnMut(&Mlp) -> f64,
    ) -> f64 {
        let mut worst = 0.0_f64;
        for p in 0..critic.param_count() {
            let orig = critic.param(p);
            critic.set_param(p, orig + FD_STEP);
            let plus = loss_fn(critic);
            critic.set_param(p, orig - FD_STEP);
            let minus = loss_fn(critic);
            critic.set_param(p, orig);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic.param(p);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
        worst
    }

    #[test]
    fn target_element_oracle_values() {
        assert!((critic_target_element(1.0, 0.99, 0.0, 2.0, 0.2, -1.0) - 3.178).abs() < 1e-12);
        // Terminal masking and zero discount both collapse to the reward.
        assert_eq!(critic_target_element(0.7, 0.99, 1.0, 5.0, 0.2, -1.0), 0.7);
        assert_eq!(critic_target_element(0.7, 0.0, 0.0, 5.0, 0.2, -1.0), 0.7);
    }

    #[test]
    fn targets_are_symmetric_under_critic_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actor = SquashedGaussianActor::new(2, 1, &[8], &[-1.0], &[1.0], &mut rng);
        let q1 = Mlp::new(&[3, 8, 1], Activation::Relu, Activation::Identity, &mut rng);
        let q2 = Mlp::new(&[3, 8, 1], Activation::Relu, Activation::Identity, &mut rng);
        let batch = random_batch(&mut rng, 16, 2, 1);
        let y12 = compute_critic_target(
            &batch, &actor, &q1, &q2, 0.2, 0.99, &mut ChaCha8Rng::seed_from_u64(7),
        );
        let y21 = compute_critic_target(
            &batch, &actor, &q2, &q1, 0.2, 0.99, &mut ChaCha8Rng::seed_from_u64(7),
        );
        assert_eq!(y12, y21);
    }

    #[test]
    fn mse_oracle_and_zero_cases() {
        // Critic reads s through w=1: predictions [1, 3] for s = [1, 3].
        let critic = affine_critic(1.0, 0.0, 0.0);
        let batch = batch_1d(&[1.0, 3.0], &[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        let (loss, _) = mse_critic_loss(&critic, &batch, &[0.0, 0.0]);
        assert_eq!(loss, 5.0);

        let (loss0, grads0) = mse_critic_loss(&critic, &batch, &[1.0, 3.0]);
        assert_eq!(loss0, 0.0);
        for p in 0..grads0.param_count() {
            assert_eq!(grads0.param(p), 0.0);
        }
    }

    #[test]
    fn mse_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut critic = Mlp::new(&[4, 12, 1], Activation::Relu, Activation::Identity, &mut rng);
        let batch = random_batch(&mut rng, 8, 3, 1);
        let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grads) = mse_critic_loss(&critic, &batch, &targets);
        let worst = fd_critic_check(&mut critic, &grads, |c| mse_critic_loss(c, &batch, &targets).0);
        assert!(worst < 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn regularizer_single_row_oracle() {
        // y = 1, ŷ_t = 0.5, ŷ_p = 0 → 3·0.5 − 2·0.5 = 0.5.
        let critic = affine_critic(0.0, 0.0, 0.5);
        let prev = affine_critic(0.0, 0.0, 0.0);
        let batch = batch_1d(&[0.0], &[0.0], &[0.0], &[0.0]);
        let (loss, _) = retrospective_regularizer(&critic, &prev, &batch, &[1.0], 2.0);
        assert!((loss - 0.5).abs() < 1e-15);
    }

    #[test]
    fn regularizer_two_row_oracle_with_a_negative_term() {
        // Rows (y, ŷ_t, ŷ_p) = (2, 1, 3) and (0, −1, −1):
        // terms 3·1 − 2·2 = −1 and 3·1 − 2·0 = 3, mean 1.
        let critic = affine_critic(1.0, 0.0, 0.0); // ŷ_t = s
        let prev = affine_critic(2.0, 0.0, 1.0); // ŷ_p = 2s + 1
        let batch = batch_1d(&[1.0, -1.0], &[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        let (loss, _) = retrospective_regularizer(&critic, &prev, &batch, &[2.0, 0.0], 2.0);
        assert!((loss - 1.0).abs() < 1e-15);

        // Scalar-loop oracle over random data, including negative batches.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 7;
            let critic = affine_critic(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let prev = affine_critic(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let kappa = rng.random_range(0.5..4.0);
            let batch = batch_1d(&s, &a, &vec![0.0; n], &vec![0.0; n]);
            let (loss, _) = retrospective_regularizer(&critic, &prev, &batch, &y, kappa);

            let mut expected = 0.0;
            for i in 0..n {
                let yt = critic.param(0) * s[i] + critic.param(1) * a[i] + critic.param(2);
                let yp = prev.param(0) * s[i] + prev.param(1) * a[i] + prev.param(2);
                expected += (kappa + 1.0) * (y[i] - yt).abs() - kappa * (yt - yp).abs();
            }
            expected /= n as f64;
            assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        }
    }

    #[test]
    fn regularizer_vanishes_at_a_perfect_tie() {
        let critic = affine_critic(1.5, -0.5, 0.25);
        let prev = critic.snapshot();
        let batch = batch_1d(&[0.4, -0.8], &[0.1, 0.6], &[0.0, 0.0], &[0.0, 0.0]);
        // Targets equal to the critic's own predictions.
        let x = batch.s.hstack(&batch.a);
        let q = critic.forward_output(&x);
        let targets = vec![q.get(0, 0), q.get(1, 0)];
        let (loss, grads) = retrospective_regularizer(&critic, &prev, &batch, &targets, 2.0);
        assert_eq!(loss, 0.0);
        for p in 0..grads.param_count() {
            assert_eq!(grads.param(p), 0.0, "nonzero subgradient at a tie");
        }
    }

    #[test]
    fn regularizer_gradients_match_finite_differences_away_from_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 10 {
            attempts += 1;
            assert!(attempts < 200, "could not find kink-free configurations");
            let mut critic =
                Mlp::new(&[4, 10, 1], Activation::Relu, Activation::Identity, &mut rng);
            let prev = Mlp::new(&[4, 10, 1], Activation::Relu, Activation::Identity, &mut rng);
            let batch = random_batch(&mut rng, 6, 3, 1);
            let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let kappa = 2.0;

            // Skip configurations with a kink within the FD probe radius.
            let x = batch.s.hstack(&batch.a);
            let q = critic.forward_output(&x);
            let qp = prev.forward_output(&x);
            let near_kink = (0..6).any(|i| {
                (q.get(i, 0) - targets[i]).abs() < 10.0 * FD_STEP
                    || (q.get(i, 0) - qp.get(i, 0)).abs() < 10.0 * FD_STEP
            });
            if near_kink {
                continue;
            }

            let (_, grads) = retrospective_regularizer(&critic, &prev, &batch, &targets, kappa);
            let worst = fd_critic_check(&mut critic, &grads, |c| {
                retrospective_regularizer(c, &prev, &batch, &targets, kappa).0
            });
            assert!(worst < 1e-4, "worst relative error {worst}");
            checked += 1;
        }
    }

    #[test]
    fn lambda_zero_is_bitwise_the_mse_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let critic = Mlp::new(&[4, 10, 1], Activation::Relu, Activation::Identity, &mut rng);
        let prev = Mlp::new(&[4, 10, 1], Activation::Relu, Activation::Identity, &mut rng);
        let batch = random_batch(&mut rng, 6, 3, 1);
        let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = total_retrospective_loss(&critic, &prev, &batch, &targets, 2.0, 0.0);
        let (mse, mse_grads) = mse_critic_loss(&critic, &batch, &targets);
        assert_eq!(out.total.to_bits(), mse.to_bits());
        assert_eq!(out.ret, 0.0);
        for p in 0..mse_grads.param_count() {
            assert_eq!(out.grads.param(p).to_bits(), mse_grads.param(p).to_bits());
        }
    }

    #[test]
    fn total_loss_is_the_sum_of_its_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let critic = Mlp::new(&[4, 10, 1], Activation::Relu, Activation::Identity, &mut rng);
        let prev = Mlp::new(&[4, 10, 1], Activation::Relu, Activation::Identity, &mut rng);
        let batch = random_batch(&mut rng, 6, 3, 1);
        let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        for lambda in [0.5, 1.0, 2.0] {
            let out = total_retrospective_loss(&critic, &prev, &batch, &targets, 2.0, lambda);
            let (mse, mut grads) = mse_critic_loss(&critic, &batch, &targets);
            let (ret, ret_grads) =
                retrospective_regularizer(&critic, &prev, &batch, &targets, 2.0);
            assert_eq!(out.total.to_bits(), (mse + lambda * ret).to_bits());
            assert_eq!(out.mse.to_bits(), mse.to_bits());
            assert_eq!(out.ret.to_bits(), ret.to_bits());
            grads.add_scaled(&ret_grads, lambda);
            for p in 0..grads.param_count() {
                assert_eq!(out.grads.param(p).to_bits(), grads.param(p).to_bits());
            }
        }
    }

    #[test]
    fn actor_loss_with_constant_critics_has_zero_q_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let actor = SquashedGaussianActor::new(3, 1, &[8], &[-1.0], &[1.0], &mut rng);
        let mut q = Mlp::new(&[4, 6, 1], Activation::Relu, Activation::Identity, &mut rng);
        for p in 0..q.param_count() {
            q.set_param(p, 0.0);
        }
        let c = 1.25;
        q.set_param(q.param_count() - 1, c); // output bias: Q ≡ c
        let states = Matrix::from_fn(5, 3, |i, j| ((i + j) as f64 * 0.4).sin());
        let eps = Matrix::from_fn(5, 1, |i, _| (i as f64 * 0.3).cos());
        let out = sac_actor_loss_with_noise(&actor, &q, &q, &states, 0.0, &eps);
        assert_eq!(out.loss, -c);
        for g in [&out.grads.trunk, &out.grads.mean, &out.grads.log_std] {
            for p in 0..g.param_count() {
                assert_eq!(g.param(p), 0.0);
            }
        }
    }

    #[test]
    fn actor_loss_is_linear_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let actor = SquashedGaussianActor::new(3, 2, &[8], &[-1.0, -1.0], &[1.0, 1.0], &mut rng);
        let q1 = Mlp::new(&[5, 8, 1], Activation::Relu, Activation::Identity, &mut rng);
        let q2 = Mlp::new(&[5, 8, 1], Activation::Relu, Activation::Identity, &mut rng);
        let states = Matrix::from_fn(6, 3, |i, j| ((2 * i + j) as f64 * 0.23).sin());
        let eps = Matrix::from_fn(6, 2, |i, j| ((i + 3 * j) as f64 * 0.37).cos());
        let l0 = sac_actor_loss_with_noise(&actor, &q1, &q2, &states, 0.0, &eps).loss;
        let l1 = sac_actor_loss_with_noise(&actor, &q1, &q2, &states, 0.2, &eps).loss;
        let l2 = sac_actor_loss_with_noise(&actor, &q1, &q2, &states, 0.4, &eps).loss;
        assert!(((l2 - l1) - (l1 - l0)).abs() < 1e-12, "not linear in alpha");
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut actor =
            SquashedGaussianActor::new(3, 2, &[8], &[-2.0, -1.0], &[2.0, 1.0], &mut rng);
        let q1 = Mlp::new(&[5, 8, 1], Activation::Relu, Activation::Identity, &mut rng);
        let q2 = Mlp::new(&[5, 8, 1], Activation::Relu, Activation::Identity, &mut rng);
        let states = Matrix::from_fn(4, 3, |i, j| ((i * 3 + j) as f64 * 0.47).sin());
        let eps = Matrix::from_fn(4, 2, |i, j| ((i * 2 + j) as f64 * 0.53).cos() * 0.7);
        let alpha = 0.2;

        let out = sac_actor_loss_with_noise(&actor, &q1, &q2, &states, alpha, &eps);
        let loss_fn = |a: &SquashedGaussianActor| {
            sac_actor_loss_with_noise(a, &q1, &q2, &states, alpha, &eps).loss
        };

        let mut worst = 0.0_f64;
        for net_idx in 0..3 {
            let count = match net_idx {
                0 => actor.trunk.param_count(),
                1 => actor.mean_head.param_count(),
                _ => actor.log_std_head.param_count(),
            };
            for p in 0..count {
                let orig = match net_idx {
                    0 => actor.trunk.param(p),
                    1 => actor.mean_head.param(p),
                    _ => actor.log_std_head.param(p),
                };
                let mut write = |a: &mut SquashedGaussianActor, v: f64| match net_idx {
                    0 => a.trunk.set_param(p, v),
                    1 => a.mean_head.set_param(p, v),
                    _ => a.log_std_head.set_param(p, v),
                };
                write(&mut actor, orig + FD_STEP);
                let plus = loss_fn(&actor);
                write(&mut actor, orig - FD_STEP);
                let minus = loss_fn(&actor);
                write(&mut actor, orig);
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let analytic = match net_idx {
                    0 => out.grads.trunk.param(p),
                    1 => out.grads.mean.param(p),
                    _ => out.grads.log_std.param(p),
                };
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max((analytic - numeric).abs() / denom);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn td3_target_tracks_the_smaller_target_critic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let actor = DeterministicActor::new(1, 1, &[4], &[-1.0], &[1.0], 0.1, &mut rng);
        let q_low = affine_critic(0.0, 0.0, 1.0);
        let q_high = affine_critic(0.0, 0.0, 2.0);
        let batch = batch_1d(&[0.3, -0.6], &[0.0, 0.0], &[0.5, 0.5], &[0.0, 1.0]);
        let y = td3_target(
            &batch, &actor, &q_low, &q_high, 0.9, 0.2, 0.5, &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!((y[0] - (0.5 + 0.9 * 1.0)).abs() < 1e-15);
        assert_eq!(y[1], 0.5, "terminal row must reduce to the reward");
    }

    #[test]
    fn td3_smoothing_noise_is_clipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let actor = DeterministicActor::new(1, 1, &[4], &[-2.0], &[2.0], 0.1, &mut rng);
        let q = affine_critic(0.0, 1.0, 0.0); // y = r + γ·a′ exposes the action
        let n = 200;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * 0.05).sin()).collect();
        let batch = batch_1d(&s, &vec![0.0; n], &vec![0.0; n], &vec![0.0; n]);
        let (a_det, _) = actor.forward_batch(&batch.s_next);
        // Enormous noise std: the clip and the bound clamp must still hold.
        let y = td3_target(&batch, &actor, &q, &q, 1.0, 50.0, 0.5, &mut rng);
        for i in 0..n {
            let a_prime = y[i]; // r = 0, γ = 1, critic reads the action back
            assert!(a_prime >= -2.0 && a_prime <= 2.0);
            assert!((a_prime - a_det.get(i, 0)).abs() <= 0.5 * 2.0 + 1e-12);
        }
    }

    #[test]
    fn ddpg_target_reduces_to_reward_when_masked() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let actor = DeterministicActor::new(1, 1, &[4], &[-1.0], &[1.0], 0.1, &mut rng);
        let q = affine_critic(0.7, -0.3, 0.2);
        let batch = batch_1d(&[0.5, 0.1], &[0.0, 0.0], &[1.5, -0.25], &[1.0, 0.0]);
        let y_terminal = ddpg_target(&batch, &actor, &q, 0.9);
        assert_eq!(y_terminal[0], 1.5);
        let y_gamma0 = ddpg_target(&batch, &actor, &q, 0.0);
        assert_eq!(y_gamma0, vec![1.5, -0.25]);
    }

    #[test]
    fn deterministic_actor_loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut actor = DeterministicActor::new(3, 2, &[8], &[-1.0, -1.0], &[1.0, 1.0], 0.1, &mut rng);
        let q = Mlp::new(&[5, 8, 1], Activation::Relu, Activation::Identity, &mut rng);
        let states = Matrix::from_fn(5, 3, |i, j| ((i + 2 * j) as f64 * 0.31).sin());
        let (_, grads, _) = deterministic_actor_loss(&actor, &q, &states);
        let mut worst = 0.0_f64;
        for p in 0..actor.net.param_count() {
            let orig = actor.net.param(p);
            actor.net.set_param(p, orig + FD_STEP);
            let plus = deterministic_actor_loss(&actor, &q, &states).0;
            actor.net.set_param(p, orig - FD_STEP);
            let minus = deterministic_actor_loss(&actor, &q, &states).0;
            actor.net.set_param(p, orig);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = grads.param(p);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
