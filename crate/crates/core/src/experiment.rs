//! The synthetic shift benchmark: generate, train staged and baseline models
//! on the source domain, then measure zero-shot transfer, few-shot curves
//! and embedding geometry on the target domain.

use crate::data::PairDataset;
use crate::error::Result;
use crate::eval::{fewshot_curve, FewShotCurve, MetricReport};
use crate::latent::{EmbeddingStats, DEFAULT_KNN};
use crate::model::{ModelConfig, PredictionModel};
use crate::nn::{Matrix, TrainConfig};
use crate::pipeline::{evaluate, FewShotSpec, Method, TrainLog, Trainer};
use crate::preprocess::{stratified_split, undersample, Scalers};
use crate::scalar::Scalar;
use crate::synthgen::{generate, ShiftConfig, SynthData};

/// Source-domain pairs prepared for training, plus the scaled target.
#[derive(Clone, Debug)]
pub struct Prepared<T> {
    pub scalers: Scalers<T>,
    /// Undersampled training pairs over scaled matrices.
    pub train: PairDataset<T>,
    pub val: PairDataset<T>,
    pub target: PairDataset<T>,
}

/// Stratified source split, scalers fitted on the training pairs, the
/// training pairs undersampled, and the target scaled with source scalers.
pub fn prepare<T: Scalar>(
    source: &PairDataset<T>,
    target: &PairDataset<T>,
    val_fraction: f64,
    seed: u64,
) -> Result<Prepared<T>> {
    let split = stratified_split(source, val_fraction, seed)?;
    let scalers = Scalers::fit(&source.subset(&split.train_indices))?;
    let scaled = scalers.apply_pairs(source)?;
    Ok(Prepared {
        train: undersample(&scaled.subset(&split.train_indices), seed)?,
        val: scaled.subset(&split.val_indices),
        target: scalers.apply_pairs(target)?,
        scalers,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub synth: ShiftConfig,
    pub arch: ModelConfig,
    pub train: TrainConfig,
    /// Optimizer settings for few-shot adaptation.
    pub adapt: TrainConfig,
    pub fewshot: FewShotSpec,
    pub val_fraction: f64,
    pub knn: usize,
    pub jobs: usize,
}

impl BenchmarkConfig {
    /// Every stage seeded from `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.synth.seed = seed;
        c.train.seed = seed;
        c.adapt.seed = seed;
        c.fewshot.seed_base = seed;
        c
    }
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            synth: ShiftConfig::default(),
            arch: ModelConfig::default(),
            train: TrainConfig::default(),
            adapt: TrainConfig::default(),
            fewshot: FewShotSpec::default(),
            val_fraction: 0.1,
            knn: DEFAULT_KNN,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MethodOutcome<T> {
    pub method: Method,
    pub model: PredictionModel<T>,
    pub log: TrainLog,
    pub source_val: MetricReport,
    pub curve: FewShotCurve,
    /// Geometry of the cell embeddings of every source and target cell.
    pub embedding: EmbeddingStats,
}

impl<T> MethodOutcome<T> {
    pub fn zero_shot_roc_auc(&self) -> f64 {
        self.curve.stat(0, |r| r.roc_auc).mean
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkOutcome<T> {
    pub data: SynthData<T>,
    pub staged: MethodOutcome<T>,
    pub baseline: MethodOutcome<T>,
}

/// Cell-encoder embeddings of all source and target cells.
pub fn cell_embeddings<T: Scalar>(model: &PredictionModel<T>, prepared: &Prepared<T>) -> Result<Matrix<T>> {
    let src = prepared.train.cell_matrix().values();
    let tgt = prepared.target.cell_matrix().values();
    let mut rows = model.cell_ae().encode(src)?.to_rows();
    rows.extend(model.cell_ae().encode(tgt)?.to_rows());
    Matrix::from_rows(&rows)
}

pub fn run_method<T: Scalar>(
    cfg: &BenchmarkConfig,
    prepared: &Prepared<T>,
    method: Method,
) -> Result<MethodOutcome<T>> {
    let trainer = Trainer::new(method, cfg.arch.clone(), cfg.train.clone());
    let mut log = TrainLog::default();
    let model = trainer.fit(&prepared.train, &mut log)?;
    let source_val = evaluate(&model, &prepared.val)?;
    let curve = fewshot_curve(&model, &prepared.target, &cfg.fewshot, &cfg.adapt, cfg.jobs)?;
    let embedding = EmbeddingStats::compute(&cell_embeddings(&model, prepared)?, cfg.knn)?;
    Ok(MethodOutcome {
        method,
        model,
        log,
        source_val,
        curve,
        embedding,
    })
}

pub fn run_benchmark<T: Scalar>(cfg: &BenchmarkConfig) -> Result<BenchmarkOutcome<T>> {
    let data = generate::<T>(&cfg.synth)?;
    let prepared = prepare(&data.source, &data.target, cfg.val_fraction, cfg.train.seed)?;
    Ok(BenchmarkOutcome {
        staged: run_method(cfg, &prepared, Method::Staged)?,
        baseline: run_method(cfg, &prepared, Method::Baseline)?,
        data,
    })
}
