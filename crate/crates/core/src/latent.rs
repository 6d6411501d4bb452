//! Latent- and feature-space geometry: PCA, pooled-covariance Mahalanobis
//! distance between group centroids, k-NN radius and its coefficient of
//! variation.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::mean_sd;
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Ridge added to a singular pooled covariance.
pub const RIDGE: f64 = 1e-9;
pub const DEFAULT_KNN: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One orthonormal component per row.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

fn to_f64<T: Scalar>(x: &Matrix<T>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(x.rows(), x.cols(), x.as_slice().iter().map(|v| v.to_f64_exact()))
}

/// Eigenpairs sorted by descending eigenvalue (stable on ties).
fn sorted_eigen(m: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &l)| (l, eig.eigenvectors.column(j).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Completes `basis` with a unit vector orthogonal to it, built from the
/// standard basis vector least aligned with the existing rows.
fn orthogonal_complement(basis: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for j in 0..d {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        for b in basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = normalize(&mut v);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn + 1e-12) {
            best = Some((n, v));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() + 1e-12 {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Principal components of the centered rows, from the eigen-decomposition
/// of the smaller of the feature covariance and the row Gram matrix.
pub fn pca_fit<T: Scalar>(x: &Matrix<T>, n_components: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n_components == 0 || n_components > d || n < n_components.max(2) {
        return Err(Error::InvalidInput(format!(
            "PCA with {n_components} components needs at least that many features and rows; got {n}x{d}"
        )));
    }
    if !x.all_finite() {
        return Err(Error::InvalidInput("PCA input has non-finite entries".into()));
    }
    let mut xc = to_f64(x);
    let mean: Vec<f64> = (0..d).map(|j| xc.column(j).mean()).collect();
    for j in 0..d {
        xc.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let denom = (n - 1) as f64;
    let total_var = xc.iter().map(|v| v * v).sum::<f64>() / denom;
    if total_var <= 0.0 {
        return Err(Error::InvalidInput("PCA input rows are all identical".into()));
    }
    let mut components = Vec::with_capacity(n_components);
    let mut explained = Vec::with_capacity(n_components);
    if d <= n {
        let cov = xc.transpose() * &xc / denom;
        for (l, v) in sorted_eigen(cov).into_iter().take(n_components) {
            explained.push(l.max(0.0));
            components.push(v);
        }
    } else {
        let gram = &xc * xc.transpose() / denom;
        for (l, u) in sorted_eigen(gram).into_iter().take(n_components) {
            let lam = l.max(0.0);
            // Right singular vector from the left one; undefined at zero variance.
            let mut v: Vec<f64> = (xc.transpose() * DMatrix::from_column_slice(n, 1, &u))
                .iter()
                .copied()
                .collect();
            if lam <= 1e-12 * total_var || normalize(&mut v) == 0.0 {
                v = orthogonal_complement(&components, d);
            }
            explained.push(lam);
            components.push(v);
        }
    }
    for (i, c) in components.iter_mut().enumerate() {
        if explained[i] <= 1e-12 * total_var {
            explained[i] = 0.0;
        }
        fix_sign(c);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: explained,
    })
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Coordinates of each row of `x` in component space.
    pub fn project<T: Scalar>(&self, x: &Matrix<T>) -> Result<Vec<Vec<f64>>> {
        if x.cols() != self.n_features() {
            return Err(Error::shape(
                "pca_project",
                format!("{} columns", self.n_features()),
                format!("{} columns", x.cols()),
            ));
        }
        Ok((0..x.rows())
            .map(|r| {
                self.components
                    .iter()
                    .map(|c| {
                        x.row(r)
                            .iter()
                            .zip(&self.mean)
                            .zip(c)
                            .map(|((v, m), w)| (v.to_f64_exact() - m) * w)
                            .sum()
                    })
                    .collect()
            })
            .collect())
    }

    /// Projection onto the first two components.
    pub fn project_2d<T: Scalar>(&self, x: &Matrix<T>) -> Result<Vec<[f64; 2]>> {
        if self.components.len() < 2 {
            return Err(Error::InvalidInput("model has fewer than 2 components".into()));
        }
        Ok(self.project(x)?.into_iter().map(|p| [p[0], p[1]]).collect())
    }
}

pub fn pca_project<T: Scalar>(model: &PcaModel, x: &Matrix<T>) -> Result<Vec<Vec<f64>>> {
    model.project(x)
}

/// Centroid distance and whether the ridge was needed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mahalanobis {
    pub distance: f64,
    pub ridged: bool,
}

fn scatter(points: &[[f64; 2]]) -> ([f64; 2], [f64; 3]) {
    let n = points.len() as f64;
    let mu = points
        .iter()
        .fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
    let mut s = [0.0; 3];
    for p in points {
        let (dx, dy) = (p[0] - mu[0], p[1] - mu[1]);
        s[0] += dx * dx;
        s[1] += dx * dy;
        s[2] += dy * dy;
    }
    (mu, s)
}

/// `sqrt((mu_a - mu_b)^T S^-1 (mu_a - mu_b))` with `S` the pooled within-group
/// covariance over `n_a + n_b - 2` degrees of freedom.
pub fn mahalanobis_detail(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<Mahalanobis> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "each group needs at least 2 points (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    let (ma, sa) = scatter(a);
    let (mb, sb) = scatter(b);
    let dof = (a.len() + b.len() - 2) as f64;
    let (mut sxx, sxy, mut syy) = ((sa[0] + sb[0]) / dof, (sa[1] + sb[1]) / dof, (sa[2] + sb[2]) / dof);
    let scale = sxx.abs().max(syy.abs()).max(1.0);
    let mut det = sxx * syy - sxy * sxy;
    let mut ridged = false;
    if det <= 1e-12 * scale * scale {
        sxx += RIDGE;
        syy += RIDGE;
        det = sxx * syy - sxy * sxy;
        ridged = true;
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::Singular("pooled covariance stays singular after ridge".into()));
        }
    }
    let (dx, dy) = (ma[0] - mb[0], ma[1] - mb[1]);
    let q = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
    Ok(Mahalanobis {
        distance: q.max(0.0).sqrt(),
        ridged,
    })
}

pub fn mahalanobis_centroid_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    Ok(mahalanobis_detail(a, b)?.distance)
}

/// Two groups projected onto the top two principal components of their
/// union, with the centroid distance between them.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftView {
    pub pca: PcaModel,
    pub source: Vec<[f64; 2]>,
    pub target: Vec<[f64; 2]>,
    pub mahalanobis: Mahalanobis,
}

pub fn shift_view<T: Scalar>(source: &Matrix<T>, target: &Matrix<T>) -> Result<ShiftView> {
    let mut rows = source.to_rows();
    rows.extend(target.to_rows());
    let pca = pca_fit(&Matrix::from_rows(&rows)?, 2)?;
    let (a, b) = (pca.project_2d(source)?, pca.project_2d(target)?);
    Ok(ShiftView {
        mahalanobis: mahalanobis_detail(&a, &b)?,
        pca,
        source: a,
        target: b,
    })
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.to_f64_exact() - y.to_f64_exact();
            d * d
        })
        .sum()
}

/// Distance from each row to its k-th nearest other row.
pub fn knn_radii<T: Scalar>(points: &Matrix<T>, k: usize) -> Result<Vec<f64>> {
    let n = points.rows();
    if k == 0 || n <= k {
        return Err(Error::InvalidInput(format!(
            "k-NN radius with k = {k} needs more than {k} points, got {n}"
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| sq_dist(points.row(i), points.row(j)))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect())
}

pub fn knn_mean_radius<T: Scalar>(points: &Matrix<T>, k: usize) -> Result<f64> {
    let r = knn_radii(points, k)?;
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

/// Population s.d. over mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    let (mean, sd) = mean_sd(values);
    if values.is_empty() || mean.abs() == 0.0 || !mean.is_finite() {
        return Err(Error::InvalidInput(
            "coefficient of variation needs a non-zero mean".into(),
        ));
    }
    Ok(sd / mean.abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingStats {
    pub mean_knn_radius: f64,
    pub coefficient_of_variation: f64,
}

impl EmbeddingStats {
    pub fn compute<T: Scalar>(points: &Matrix<T>, k: usize) -> Result<Self> {
        let r = knn_radii(points, k)?;
        Ok(EmbeddingStats {
            mean_knn_radius: r.iter().sum::<f64>() / r.len() as f64,
            coefficient_of_variation: coefficient_of_variation(&r)?,
        })
    }
}

/// Rows of a `group,metric,value` table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnalysisTable {
    pub rows: Vec<(String, String, f64)>,
}

impl AnalysisTable {
    pub fn push(&mut self, group: impl Into<String>, metric: impl Into<String>, value: f64) {
        self.rows.push((group.into(), metric.into(), value));
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("group,metric,value\n");
        for (g, m, v) in &self.rows {
            s.push_str(&format!("{g},{m},{v}\n"));
        }
        s
    }
}
