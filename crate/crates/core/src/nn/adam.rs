//! Adam with bias correction and coupled L2 weight decay.

use crate::error::{Error, Result};
use crate::nn::config::TrainConfig;
use crate::scalar::Scalar;

/// Moment buffers for one parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }
}

/// One Adam update of `params` in place.
///
/// The gradient is first augmented with `weight_decay * param`, then the
/// moments are updated and the bias-corrected step is applied. Gradients are
/// checked for finiteness before anything is modified.
pub fn adam_step<T: Scalar>(
    block: &str,
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::shape(
            format!("adam_step `{block}`"),
            format!("{} parameters/moments", params.len()),
            format!("{} gradients, {} moments", grads.len(), state.m.len()),
        ));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            block: block.to_string(),
        });
    }

    state.t += 1;
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let one = T::one();
    let wd = T::lit(cfg.weight_decay);
    let lr = T::lit(cfg.learning_rate);
    let eps = T::lit(cfg.epsilon);
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let bias1 = one - b1.powi(t);
    let bias2_sqrt = (one - b2.powi(t)).sqrt();
    let step_size = lr / bias1;

    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let g = if cfg.weight_decay != 0.0 { g + wd * *p } else { g };
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        if cfg.learning_rate != 0.0 {
            let denom = v.sqrt() / bias2_sqrt + eps;
            *p = *p - step_size * (*m / denom);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, wd: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            weight_decay: wd,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_gradient_without_decay_keeps_params() {
        let mut p = vec![0.3f64, -1.2, 5.0];
        let before = p.clone();
        let mut st = AdamState::new(3);
        for _ in 0..5 {
            adam_step("p", &mut p, &[0.0; 3], &mut st, &cfg(1e-3, 0.0)).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.t, 5);
    }

    #[test]
    fn one_step_from_zero() {
        let mut p = vec![0.0f64];
        let mut st = AdamState::new(1);
        adam_step("p", &mut p, &[1.0], &mut st, &cfg(1e-3, 0.0)).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction.
        let expected = -1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-15, "{}", p[0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_learning_rate_is_noop_but_moments_move() {
        let mut p = vec![0.5f64, -0.5];
        let mut st = AdamState::new(2);
        adam_step("p", &mut p, &[1.0, -2.0], &mut st, &cfg(0.0, 1e-8)).unwrap();
        assert_eq!(p, vec![0.5, -0.5]);
        assert!(st.m[0] > 0.0 && st.v[1] > 0.0);
    }

    #[test]
    fn identical_blocks_update_identically() {
        let mut a = vec![0.1f64, 0.2, -0.3];
        let mut b = a.clone();
        let (mut sa, mut sb) = (AdamState::new(3), AdamState::new(3));
        let g = [0.7, -0.01, 3.0];
        for _ in 0..10 {
            adam_step("a", &mut a, &g, &mut sa, &cfg(1e-3, 1e-8)).unwrap();
            adam_step("b", &mut b, &g, &mut sb, &cfg(1e-3, 1e-8)).unwrap();
        }
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn coupled_decay_enters_moments() {
        let mut p = vec![2.0f64];
        let mut st = AdamState::new(1);
        adam_step("p", &mut p, &[0.0], &mut st, &cfg(1e-3, 0.5)).unwrap();
        assert!((st.m[0] - 0.1).abs() < 1e-15);
        assert!(p[0] < 2.0);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = vec![0.0f64; 2];
        let mut st = AdamState::new(2);
        let err = adam_step("cell.enc.0.w", &mut p, &[0.0, f64::NAN], &mut st, &cfg(1e-3, 0.0)).unwrap_err();
        assert!(err.to_string().contains("cell.enc.0.w"));
        assert_eq!(st.t, 0);
    }
}
