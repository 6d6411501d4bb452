//! Threshold-free ranking metrics and balanced accuracy.
//!
//! ROC-AUC uses the Mann–Whitney statistic with midranks for ties. PR-AUC is
//! average precision: the mean of the precision at each positive, walking the
//! scores in descending order with ties kept in their original order.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Decision threshold for balanced accuracy.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn check<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "metric input",
            format!("{} labels", scores.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

fn both_classes(pos: usize, neg: usize, metric: &str) -> Result<()> {
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{metric} needs both classes ({pos} positives, {neg} negatives)"
        )));
    }
    Ok(())
}

fn cmp<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).expect("NaN rejected earlier")
}

/// Area under the ROC curve: `P(s_pos > s_neg) + P(s_pos = s_neg) / 2`.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    let (n_pos, n_neg) = check(scores, labels)?;
    both_classes(n_pos, n_neg, "ROC-AUC")?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(scores[a], scores[b]));
    // Sum of 1-based midranks of the positives.
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count();
        rank_sum += midrank * pos_in_group as f64;
        i = j;
    }
    let np = n_pos as f64;
    let u = rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// Average precision.
pub fn pr_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    let (n_pos, _) = check(scores, labels)?;
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("PR-AUC needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(scores[b], scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0f64;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// `(TPR + TNR) / 2`, predicting positive when `score >= threshold`.
pub fn balanced_accuracy<T: Scalar>(scores: &[T], labels: &[bool], threshold: T) -> Result<f64> {
    let (n_pos, n_neg) = check(scores, labels)?;
    both_classes(n_pos, n_neg, "balanced accuracy")?;
    let (mut tp, mut tn) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    Ok((tp as f64 / n_pos as f64 + tn as f64 / n_neg as f64) / 2.0)
}

/// Scalar metrics of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub balanced_accuracy: f64,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl MetricReport {
    pub fn compute<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<Self> {
        let (n_pos, n_neg) = check(scores, labels)?;
        Ok(MetricReport {
            roc_auc: roc_auc(scores, labels)?,
            pr_auc: pr_auc(scores, labels)?,
            balanced_accuracy: balanced_accuracy(scores, labels, T::lit(DEFAULT_THRESHOLD))?,
            threshold: DEFAULT_THRESHOLD,
            n_pos,
            n_neg,
        })
    }
}

/// Population mean and standard deviation. Empty input gives `(NaN, NaN)`.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.9], &[false, true]).unwrap(), 1.0);
        let labels = [false, true, true, false];
        assert_eq!(roc_auc(&[0.2, 0.8, 0.4, 0.6], &labels).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.3; 4], &labels).unwrap(), 0.5);
        assert!(roc_auc(&[0.3, 0.4], &[true, true]).is_err());
    }

    #[test]
    fn pr_examples() {
        assert_eq!(pr_auc(&[0.1, 0.9, 0.2], &[false, true, false]).unwrap(), 1.0);
        let ap = pr_auc(&[0.2, 0.8, 0.4, 0.6], &[false, true, true, false]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
        assert!(pr_auc(&[0.2, 0.8], &[false, false]).is_err());
    }

    #[test]
    fn pr_ties_keep_input_order() {
        // Tied scores: the positive listed first ranks first.
        assert_eq!(pr_auc(&[0.5, 0.5], &[true, false]).unwrap(), 1.0);
        assert_eq!(pr_auc(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn balanced_accuracy_examples() {
        let labels = [true, false, true, false];
        assert_eq!(balanced_accuracy(&[0.9, 0.1, 0.8, 0.3], &labels, 0.5).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[0.9, 0.9, 0.9, 0.9], &labels, 0.5).unwrap(), 0.5);
        // 5 positives with 4 predicted positive, 5 negatives with 3 predicted negative.
        let labels: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let scores = [0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.9, 0.9];
        assert!((balanced_accuracy(&scores, &labels, 0.5).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn report_counts() {
        let r = MetricReport::compute(&[0.1f32, 0.7, 0.6], &[false, true, false]).unwrap();
        assert_eq!((r.n_pos, r.n_neg), (1, 2));
        assert_eq!(r.roc_auc, 1.0);
        assert!(MetricReport::compute(&[f64::NAN, 0.3], &[true, false]).is_err());
    }

    #[test]
    fn mean_sd_population() {
        assert_eq!(mean_sd(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_sd(&[0.4]), (0.4, 0.0));
    }
}
