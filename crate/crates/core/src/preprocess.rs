//! Leakage-safe preprocessing: min-max statistics from training rows only,
//! stratified train/validation splits and training-set undersampling.

use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::data::{FeatureMatrix, PairDataset};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::StreamRng;
use crate::scalar::Scalar;

/// Per-feature minimum and maximum of the fitting rows.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxScaler<T> {
    pub feature_min: Vec<T>,
    pub feature_max: Vec<T>,
    pub fitted_on: usize,
}

/// Fits on every row of `train`.
pub fn fit_minmax<T: Scalar>(train: &Matrix<T>) -> Result<MinMaxScaler<T>> {
    let rows: Vec<usize> = (0..train.rows()).collect();
    fit_minmax_rows(train, &rows)
}

/// Fits on the listed rows of `matrix` only.
pub fn fit_minmax_rows<T: Scalar>(matrix: &Matrix<T>, rows: &[usize]) -> Result<MinMaxScaler<T>> {
    let Some((&first, rest)) = rows.split_first() else {
        return Err(Error::InvalidInput("cannot fit a scaler on zero rows".into()));
    };
    let mut lo = matrix.row(first).to_vec();
    let mut hi = lo.clone();
    for &r in rest {
        for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(matrix.row(r)) {
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    Ok(MinMaxScaler {
        feature_min: lo,
        feature_max: hi,
        fitted_on: rows.len(),
    })
}

impl<T: Scalar> MinMaxScaler<T> {
    pub fn n_features(&self) -> usize {
        self.feature_min.len()
    }

    /// `(x - min) / (max - min)`; zero-range features map to 0. Values are
    /// not clamped, so unseen data may fall outside `[0, 1]`.
    pub fn apply(&self, matrix: &Matrix<T>) -> Result<Matrix<T>> {
        if matrix.cols() != self.n_features() {
            return Err(Error::shape(
                "apply_minmax",
                format!("{} columns", self.n_features()),
                format!("{} columns", matrix.cols()),
            ));
        }
        let mut out = matrix.clone();
        for r in 0..out.rows() {
            for ((v, &lo), &hi) in out.row_mut(r).iter_mut().zip(&self.feature_min).zip(&self.feature_max) {
                let range = hi - lo;
                *v = if range > T::zero() {
                    (*v - lo) / range
                } else {
                    T::zero()
                };
            }
        }
        Ok(out)
    }

    pub fn apply_features(&self, matrix: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        matrix.with_values(self.apply(matrix.values())?)
    }
}

/// Train-fit scalers for both modalities.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalers<T> {
    pub cell: MinMaxScaler<T>,
    pub drug: MinMaxScaler<T>,
}

impl<T: Scalar> Scalers<T> {
    /// Fits on the cells and drugs referenced by `train` only.
    pub fn fit(train: &PairDataset<T>) -> Result<Self> {
        Ok(Scalers {
            cell: fit_minmax_rows(train.cell_matrix().values(), &train.cell_rows())?,
            drug: fit_minmax_rows(train.drug_matrix().values(), &train.drug_rows())?,
        })
    }

    /// The same pairs over scaled copies of both matrices.
    pub fn apply_pairs(&self, ds: &PairDataset<T>) -> Result<PairDataset<T>> {
        ds.with_matrices(
            Arc::new(self.cell.apply_features(ds.cell_matrix())?),
            Arc::new(self.drug.apply_features(ds.drug_matrix())?),
        )
    }
}

pub fn apply_minmax<T: Scalar>(scaler: &MinMaxScaler<T>, matrix: &Matrix<T>) -> Result<Matrix<T>> {
    scaler.apply(matrix)
}

/// Disjoint train/validation pair indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

/// Validation counts per class by largest-remainder apportionment of
/// `round(n * fraction)`, with at least one sample per non-empty class.
/// Ties in the remainder go to the lower class label.
pub(crate) fn stratified_counts(class_sizes: [usize; 2], fraction: f64) -> [usize; 2] {
    let total: usize = class_sizes.iter().sum();
    let target = (total as f64 * fraction).round() as usize;
    let quotas: Vec<f64> = class_sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut counts = [quotas[0].floor() as usize, quotas[1].floor() as usize];
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(counts[0] + counts[1]);
    for &c in order.iter().cycle().take(4) {
        if remaining == 0 {
            break;
        }
        if counts[c] < class_sizes[c] {
            counts[c] += 1;
            remaining -= 1;
        }
    }
    for c in 0..2 {
        if class_sizes[c] > 0 {
            counts[c] = counts[c].max(1);
        }
    }
    counts
}

fn class_indices<T: Scalar>(ds: &PairDataset<T>) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, p) in ds.pairs().iter().enumerate() {
        by_class[p.label.as_u8() as usize].push(i);
    }
    by_class
}

/// Stratified split with per-class validation counts from
/// [`stratified_counts`]; membership is chosen by a seeded shuffle.
pub fn stratified_split<T: Scalar>(ds: &PairDataset<T>, val_fraction: f64, seed: u64) -> Result<SplitAssignment> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "validation fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut by_class = class_indices(ds);
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("stratified split needs both classes".into()));
    }
    let counts = stratified_counts([by_class[0].len(), by_class[1].len()], val_fraction);
    for c in 0..2 {
        if counts[c] >= by_class[c].len() {
            return Err(Error::InvalidInput(format!(
                "class {c} has {} pairs: too few to leave any for training",
                by_class[c].len()
            )));
        }
    }
    let mut rng = StreamRng::derived(seed, "split", &[]);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        val.extend_from_slice(&idx[..counts[c]]);
        train.extend_from_slice(&idx[counts[c]..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok(SplitAssignment {
        train_indices: train,
        val_indices: val,
        seed,
        stratified: true,
    })
}

/// Indices of a class-balanced subset: the majority class is subsampled
/// without replacement to the minority count, then the result is shuffled.
pub fn undersample_indices<T: Scalar>(ds: &PairDataset<T>, seed: u64) -> Result<Vec<usize>> {
    let mut by_class = class_indices(ds);
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("undersampling needs both classes".into()));
    }
    let mut rng = StreamRng::derived(seed, "undersample", &[]);
    let minority = by_class[0].len().min(by_class[1].len());
    let mut out = Vec::with_capacity(2 * minority);
    for idx in by_class.iter_mut() {
        if idx.len() > minority {
            idx.shuffle(&mut rng);
            idx.truncate(minority);
        }
        out.extend_from_slice(idx);
    }
    out.shuffle(&mut rng);
    Ok(out)
}

pub fn undersample<T: Scalar>(ds: &PairDataset<T>, seed: u64) -> Result<PairDataset<T>> {
    Ok(ds.subset(&undersample_indices(ds, seed)?))
}
