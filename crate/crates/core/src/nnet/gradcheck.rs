use super::mlp::{Mlp, MlpGrads};

/// Central-difference step used by every finite-difference check in the
/// workspace (64-bit floats).
pub const FD_STEP: f64 = 1e-5;

/// Compares `analytic` against central finite differences of `loss` over
/// every parameter of `mlp` and returns the worst relative error, with the
/// denominator floored at 1e-8 so that near-zero gradients are judged on
/// absolute error. Callers assert against their own tolerance.
pub fn grad_check(mlp: &Mlp, analytic: &MlpGrads, mut loss: impl FnMut(&Mlp) -> f64) -> f64 {
    assert_eq!(mlp.param_count(), analytic.param_count(), "gradient shape mismatch");
    let mut work = mlp.clone();
    let mut worst: f64 = 0.0;
    for i in 0..work.param_count() {
        let orig = work.param(i);
        work.set_param(i, orig + FD_STEP);
        let up = loss(&work);
        work.set_param(i, orig - FD_STEP);
        let down = loss(&work);
        work.set_param(i, orig);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let ana = analytic.param(i);
        let denom = ana.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((ana - numeric).abs() / denom);
    }
    worst
}
