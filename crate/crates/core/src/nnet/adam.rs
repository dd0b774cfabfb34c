use thiserror::Error;

use super::mlp::{Mlp, MlpGrads};

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("non-finite gradient at layer {layer} ({kind}[{index}]) = {value}")]
    NonFiniteGradient {
        layer: usize,
        kind: &'static str,
        index: usize,
        value: f64,
    },
}

/// Adam accumulators mirroring one [`Mlp`]. β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
#[derive(Clone, Debug)]
pub struct AdamState {
    first_moment: MlpGrads,
    second_moment: MlpGrads,
    step_count: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        AdamState {
            first_moment: MlpGrads::zeros_like(mlp),
            second_moment: MlpGrads::zeros_like(mlp),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected Adam update in place. A non-finite gradient entry
/// aborts before touching parameters or accumulators.
pub fn adam_step(
    mlp: &mut Mlp,
    grads: &MlpGrads,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NnetError> {
    assert_eq!(mlp.param_count(), grads.param_count(), "gradient shape mismatch");
    assert_eq!(mlp.param_count(), state.first_moment.param_count(), "optimizer state mismatch");
    if let Some((layer, kind, index, value)) = grads.first_non_finite() {
        return Err(NnetError::NonFiniteGradient {
            layer,
            kind,
            index,
            value,
        });
    }
    state.step_count += 1;
    let b1 = state.beta1;
    let b2 = state.beta2;
    let eps = state.epsilon;
    let bc1 = 1.0 - b1.powi(state.step_count as i32);
    let bc2 = 1.0 - b2.powi(state.step_count as i32);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    };
    for k in 0..mlp.weights.len() {
        let g = &grads.weights[k];
        let m = &mut state.first_moment.weights[k];
        let v = &mut state.second_moment.weights[k];
        let pw = mlp.weights[k].as_mut_slice();
        for (((p, &gx), mx), vx) in pw
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
        {
            update(p, gx, mx, vx);
        }
        let gb = &grads.biases[k];
        let mb = &mut state.first_moment.biases[k];
        let vb = &mut state.second_moment.biases[k];
        for (((p, &gx), mx), vx) in mlp.biases[k].iter_mut().zip(gb).zip(mb).zip(vb) {
            update(p, gx, mx, vx);
        }
    }
    Ok(())
}
