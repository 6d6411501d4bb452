//! Central finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::nn::loss::Loss;
use crate::nn::matrix::Matrix;
use crate::nn::network::{flatten_grads, Sequential};
use crate::scalar::Scalar;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Relative error `|a - b| / max(|a|, |b|, 1e-12)`.
pub fn relative_error<T: Scalar>(a: T, b: T) -> T {
    let denom = a.abs().max(b.abs()).max(T::lit(1e-12));
    (a - b).abs() / denom
}

/// Largest relative error between backpropagated gradients and central
/// differences over every parameter of `network`.
pub fn gradient_check<T: Scalar>(network: &Sequential<T>, loss: Loss, x: &Matrix<T>, y: &Matrix<T>) -> Result<T> {
    let (_, grads) = network.loss_and_grads(loss, x, y)?;
    let analytic = flatten_grads(&grads);
    let h = T::lit(FD_STEP);
    let two_h = h + h;
    let mut probe = network.clone();
    let mut worst = T::zero();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + h;
        let plus = probe.loss(loss, x, y)?;
        *probe.param_mut(i) = orig - h;
        let minus = probe.loss(loss, x, y)?;
        *probe.param_mut(i) = orig;
        let fd = (plus - minus) / two_h;
        worst = worst.max(relative_error(a, fd));
    }
    Ok(worst)
}
