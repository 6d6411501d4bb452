//! Synthetic source/target pair data with tunable covariate, label and
//! concept shift.
//!
//! Cells and drugs carry standard-normal latent factors. Features are a
//! random linear map of the latents plus Gaussian noise, and target cells
//! are additionally translated along one fixed random direction. A pair is
//! sensitive iff `w_cell . z_cell + w_drug . z_drug + b > 0`, with the drug
//! weights `drug_weight_ratio` times heavier than the cell weights.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{
    write_feature_matrix, write_response_pairs, DatasetTag, FeatureMatrix, Label, ModalityKind, PairDataset,
    ResponsePair,
};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::StreamRng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftConfig {
    pub n_cells_source: usize,
    pub n_cells_target: usize,
    pub n_drugs: usize,
    pub latent_dim_true: usize,
    pub feature_dim_cell: usize,
    pub feature_dim_drug: usize,
    /// Target-cell translation, in units of the typical per-feature
    /// standard deviation.
    pub shift_delta: f64,
    /// Offset of the target labeling bias, in units of the logit s.d.
    pub label_shift: f64,
    /// Rotation angle (radians) of the target labeling weights.
    pub concept_shift: f64,
    pub noise_sigma: f64,
    /// Norm of drug weights over norm of cell weights.
    pub drug_weight_ratio: f64,
    /// Fraction of all (cell, drug) combinations observed as labeled pairs.
    pub pair_fraction: f64,
    pub seed: u64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            n_cells_source: 400,
            n_cells_target: 200,
            n_drugs: 30,
            latent_dim_true: 8,
            feature_dim_cell: 500,
            feature_dim_drug: 100,
            shift_delta: 0.0,
            label_shift: 0.0,
            concept_shift: 0.0,
            noise_sigma: 0.1,
            drug_weight_ratio: 3.0,
            pair_fraction: 0.25,
            seed: 42,
        }
    }
}

impl ShiftConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.n_cells_source,
            self.n_cells_target,
            self.n_drugs,
            self.latent_dim_true,
            self.feature_dim_cell,
            self.feature_dim_drug,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(
                "synthetic sizes and dimensions must be at least 1".into(),
            ));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.shift_delta) || !finite_nonneg(self.concept_shift) || !finite_nonneg(self.noise_sigma) {
            return Err(Error::Config(
                "shift_delta, concept_shift and noise_sigma must be finite and >= 0".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.label_shift) {
            return Err(Error::Config(format!(
                "label_shift must lie in [-1, 1], got {}",
                self.label_shift
            )));
        }
        if !(self.drug_weight_ratio.is_finite() && self.drug_weight_ratio > 0.0) {
            return Err(Error::Config("drug_weight_ratio must be positive".into()));
        }
        if !(self.pair_fraction > 0.0 && self.pair_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "pair_fraction must lie in (0, 1], got {}",
                self.pair_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

/// The generating labeler, for ceilings and sanity checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Oracle {
    pub latent_dim: usize,
    pub w_source: Vec<f64>,
    pub w_target: Vec<f64>,
    pub b_source: f64,
    pub b_target: f64,
    pub z_cells_source: Vec<Vec<f64>>,
    pub z_cells_target: Vec<Vec<f64>>,
    pub z_drugs: Vec<Vec<f64>>,
    /// Unit-norm translation direction of target cells in feature space.
    pub shift_direction: Vec<f64>,
}

impl Oracle {
    fn logit_latent(&self, domain: Domain, zc: &[f64], zd: &[f64]) -> f64 {
        let (w, b) = match domain {
            Domain::Source => (&self.w_source, self.b_source),
            Domain::Target => (&self.w_target, self.b_target),
        };
        let l = self.latent_dim;
        zc.iter()
            .zip(&w[..l])
            .chain(zd.iter().zip(&w[l..]))
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + b
    }

    /// Noise-free logit of a pair by entity index.
    pub fn logit(&self, domain: Domain, cell: usize, drug: usize) -> f64 {
        let zc = match domain {
            Domain::Source => &self.z_cells_source[cell],
            Domain::Target => &self.z_cells_target[cell],
        };
        self.logit_latent(domain, zc, &self.z_drugs[drug])
    }

    /// Oracle logits for every pair of `ds`, which must come from `domain`.
    pub fn scores<T: Scalar>(&self, domain: Domain, ds: &PairDataset<T>) -> Vec<f64> {
        ds.rows().iter().map(|&(c, d)| self.logit(domain, c, d)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SynthData<T> {
    pub source: PairDataset<T>,
    pub target: PairDataset<T>,
    pub oracle: Oracle,
}

fn normal_vec(rng: &mut StreamRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// `rows x dim` loading matrix with N(0, 1/latent) entries, so each feature
/// has unit variance before noise.
fn loading(rng: &mut StreamRng, dim: usize, latent: usize) -> Vec<Vec<f64>> {
    let s = 1.0 / (latent as f64).sqrt();
    (0..dim).map(|_| normal_vec(rng, latent, s)).collect()
}

fn features(z: &[Vec<f64>], a: &[Vec<f64>], offset: Option<&[f64]>, sigma: f64, rng: &mut StreamRng) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len() * a.len());
    for zi in z {
        for (j, aj) in a.iter().enumerate() {
            let mut v: f64 = aj.iter().zip(zi).map(|(x, y)| x * y).sum();
            if let Some(o) = offset {
                v += o[j];
            }
            v += sigma * rng.sample::<f64, _>(StandardNormal);
            out.push(v);
        }
    }
    out
}

fn to_matrix<T: Scalar>(rows: usize, cols: usize, v: Vec<f64>) -> Result<Matrix<T>> {
    Matrix::from_vec(rows, cols, v.into_iter().map(T::lit).collect())
}

fn pairs_for(
    prefix: &str,
    n_cells: usize,
    n_drugs: usize,
    fraction: f64,
    label: impl Fn(usize, usize) -> bool,
    rng: &mut StreamRng,
) -> Vec<ResponsePair> {
    let total = n_cells * n_drugs;
    let k = ((total as f64 * fraction).round() as usize).clamp(1, total);
    let mut picked = sample(rng, total, k).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| {
            let (c, d) = (i / n_drugs, i % n_drugs);
            ResponsePair::new(
                format!("{prefix}{c}"),
                format!("drug{d}"),
                Label::from_bool(label(c, d)),
            )
        })
        .collect()
}

/// Generates source and target pair datasets sharing one drug matrix.
pub fn generate<T: Scalar>(cfg: &ShiftConfig) -> Result<SynthData<T>> {
    cfg.validate()?;
    let l = cfg.latent_dim_true;
    let stream = |part: &str| StreamRng::derived(cfg.seed, &format!("synth/{part}"), &[]);

    let mut rng = stream("loadings");
    let a_cell = loading(&mut rng, cfg.feature_dim_cell, l);
    let a_drug = loading(&mut rng, cfg.feature_dim_drug, l);
    let dir = unit(normal_vec(&mut stream("shift"), cfg.feature_dim_cell, 1.0));
    // Per-feature RMS of the translation equals delta times the feature s.d.
    let feature_sd = (1.0 + cfg.noise_sigma * cfg.noise_sigma).sqrt();
    let scale = cfg.shift_delta * feature_sd * (cfg.feature_dim_cell as f64).sqrt();
    let offset: Vec<f64> = dir.iter().map(|u| u * scale).collect();

    let mut rng = stream("latents");
    let zs: Vec<Vec<f64>> = (0..cfg.n_cells_source).map(|_| normal_vec(&mut rng, l, 1.0)).collect();
    let zt: Vec<Vec<f64>> = (0..cfg.n_cells_target).map(|_| normal_vec(&mut rng, l, 1.0)).collect();
    let zd: Vec<Vec<f64>> = (0..cfg.n_drugs).map(|_| normal_vec(&mut rng, l, 1.0)).collect();

    let mut rng = stream("weights");
    let wc = unit(normal_vec(&mut rng, l, 1.0));
    let wd: Vec<f64> = unit(normal_vec(&mut rng, l, 1.0))
        .into_iter()
        .map(|v| v * cfg.drug_weight_ratio)
        .collect();
    let w_source: Vec<f64> = wc.into_iter().chain(wd).collect();
    let w_norm = w_source.iter().map(|x| x * x).sum::<f64>().sqrt();
    // Rotate within the plane of w and a random orthogonal direction.
    let mut perp = normal_vec(&mut rng, 2 * l, 1.0);
    let proj: f64 = perp.iter().zip(&w_source).map(|(a, b)| a * b).sum::<f64>() / (w_norm * w_norm);
    perp.iter_mut().zip(&w_source).for_each(|(p, w)| *p -= proj * w);
    let perp = unit(perp);
    let (c, s) = (cfg.concept_shift.cos(), cfg.concept_shift.sin());
    let w_target: Vec<f64> = w_source
        .iter()
        .zip(&perp)
        .map(|(w, p)| c * w + s * w_norm * p)
        .collect();
    // With standard-normal latents the logit s.d. equals |w|.
    let b_target = cfg.label_shift * w_norm;

    let oracle = Oracle {
        latent_dim: l,
        w_source,
        w_target,
        b_source: 0.0,
        b_target,
        z_cells_source: zs,
        z_cells_target: zt,
        z_drugs: zd,
        shift_direction: dir,
    };

    let mut rng = stream("noise");
    let xs = features(&oracle.z_cells_source, &a_cell, None, cfg.noise_sigma, &mut rng);
    let xt = features(
        &oracle.z_cells_target,
        &a_cell,
        Some(&offset),
        cfg.noise_sigma,
        &mut rng,
    );
    let xd = features(&oracle.z_drugs, &a_drug, None, cfg.noise_sigma, &mut rng);

    let cell_ids: Vec<String> = (0..cfg.feature_dim_cell).map(|j| format!("expr:g{j}")).collect();
    let drug_ids: Vec<String> = (0..cfg.feature_dim_drug).map(|j| format!("desc:d{j}")).collect();
    let src_cells = Arc::new(FeatureMatrix::new(
        (0..cfg.n_cells_source).map(|i| format!("src{i}")).collect(),
        cell_ids.clone(),
        to_matrix(cfg.n_cells_source, cfg.feature_dim_cell, xs)?,
        ModalityKind::Cell,
    )?);
    let tgt_cells = Arc::new(FeatureMatrix::new(
        (0..cfg.n_cells_target).map(|i| format!("tgt{i}")).collect(),
        cell_ids,
        to_matrix(cfg.n_cells_target, cfg.feature_dim_cell, xt)?,
        ModalityKind::Cell,
    )?);
    let drugs = Arc::new(FeatureMatrix::new(
        (0..cfg.n_drugs).map(|d| format!("drug{d}")).collect(),
        drug_ids,
        to_matrix(cfg.n_drugs, cfg.feature_dim_drug, xd)?,
        ModalityKind::Drug,
    )?);

    let mut rng = stream("pairs");
    let sp = pairs_for(
        "src",
        cfg.n_cells_source,
        cfg.n_drugs,
        cfg.pair_fraction,
        |c, d| oracle.logit(Domain::Source, c, d) > 0.0,
        &mut rng,
    );
    let tp = pairs_for(
        "tgt",
        cfg.n_cells_target,
        cfg.n_drugs,
        cfg.pair_fraction,
        |c, d| oracle.logit(Domain::Target, c, d) > 0.0,
        &mut rng,
    );
    let source = PairDataset::new(sp, src_cells, Arc::clone(&drugs), DatasetTag::Synthetic)?;
    let target = PairDataset::new(tp, tgt_cells, drugs, DatasetTag::Synthetic)?;
    Ok(SynthData { source, target, oracle })
}

/// File names written by [`write_synth`].
pub const SYNTH_FILES: [&str; 5] = [
    "source_cells.csv",
    "target_cells.csv",
    "drugs.csv",
    "source_pairs.csv",
    "target_pairs.csv",
];

/// Writes both datasets in the ingestion formats.
pub fn write_synth<T: Scalar>(data: &SynthData<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_feature_matrix(data.source.cell_matrix(), dir.join(SYNTH_FILES[0]))?;
    write_feature_matrix(data.target.cell_matrix(), dir.join(SYNTH_FILES[1]))?;
    write_feature_matrix(data.source.drug_matrix(), dir.join(SYNTH_FILES[2]))?;
    write_response_pairs(&data.source, dir.join(SYNTH_FILES[3]))?;
    write_response_pairs(&data.target, dir.join(SYNTH_FILES[4]))?;
    Ok(())
}
