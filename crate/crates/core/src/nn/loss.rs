use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::scalar::Scalar;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Mean squared error over all elements and its gradient `2(pred - target)/N`.
pub fn mse_loss<T: Scalar>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    let n = T::from_usize(pred.as_slice().len().max(1)).unwrap();
    let two = T::lit(2.0);
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut sum = T::zero();
    for ((g, &p), &t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let d = p - t;
        sum = sum + d * d;
        *g = two * d / n;
    }
    Ok((sum / n, grad))
}

fn check_labels<T: Scalar>(labels: &[T]) -> Result<()> {
    match labels.iter().find(|&&y| y != T::zero() && y != T::one()) {
        Some(y) => Err(Error::InvalidLabel(y.to_string())),
        None => Ok(()),
    }
}

/// Binary cross-entropy `-mean(y ln p + (1-y) ln(1-p))` on clamped probabilities.
///
/// The returned gradient is with respect to the probabilities; entries whose
/// probability was clamped get a zero gradient.
pub fn bce_loss<T: Scalar>(prob: &[T], labels: &[T]) -> Result<(T, Vec<T>)> {
    if prob.len() != labels.len() {
        return Err(Error::shape(
            "bce_loss",
            format!("{} labels", prob.len()),
            format!("{} labels", labels.len()),
        ));
    }
    check_labels(labels)?;
    let eps = T::lit(PROB_EPS);
    let one = T::one();
    let n = T::from_usize(prob.len().max(1)).unwrap();
    let mut sum = T::zero();
    let mut grad = Vec::with_capacity(prob.len());
    for (&p, &y) in prob.iter().zip(labels) {
        let clamped = p.max(eps).min(one - eps);
        sum = sum - (y * clamped.ln() + (one - y) * (one - clamped).ln());
        if clamped != p {
            grad.push(T::zero());
        } else {
            grad.push((clamped - y) / (clamped * (one - clamped)) / n);
        }
    }
    Ok((sum / n, grad))
}

/// Gradient of the mean BCE with respect to the logits feeding a sigmoid:
/// `(p - y) / N`.
pub fn bce_logit_grad<T: Scalar>(prob: &[T], labels: &[T]) -> Result<Vec<T>> {
    if prob.len() != labels.len() {
        return Err(Error::shape(
            "bce_logit_grad",
            format!("{} labels", prob.len()),
            format!("{} labels", labels.len()),
        ));
    }
    check_labels(labels)?;
    let n = T::from_usize(prob.len().max(1)).unwrap();
    Ok(prob.iter().zip(labels).map(|(&p, &y)| (p - y) / n).collect())
}

/// Training objective attached to a network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    Mse,
    Bce,
}
