//! Cross-validation and zero-shot cross-dataset evaluation.

use rayon::prelude::*;

use crate::data::PairDataset;
use crate::error::{Error, Result};
use crate::eval::metrics::{mean_sd, MetricReport};
use crate::eval::split::SplitPlan;
use crate::model::PredictionModel;
use crate::pipeline::{evaluate, TrainLog, Trainer};
use crate::preprocess::{undersample_indices, Scalers};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

/// Result of one fold.
#[derive(Clone, Debug)]
pub struct FoldResult<T> {
    pub fold: usize,
    pub report: MetricReport,
    /// Scalers fitted on this fold's training pairs.
    pub scalers: Scalers<T>,
    /// Training pair indices after undersampling, in the plan's numbering.
    pub train_indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CvSummary<T> {
    pub protocol: String,
    pub folds: Vec<FoldResult<T>>,
}

impl<T> CvSummary<T> {
    /// `(mean, population sd)` of a metric over folds.
    pub fn aggregate(&self, metric: impl Fn(&MetricReport) -> f64) -> (f64, f64) {
        let v: Vec<f64> = self.folds.iter().map(|f| metric(&f.report)).collect();
        mean_sd(&v)
    }

    /// `protocol,fold,roc_auc,pr_auc,balanced_accuracy,n_pos,n_neg` rows plus
    /// `mean` and `sd` rows.
    pub fn to_table(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        for f in &self.folds {
            s.push_str(&metrics_row(&self.protocol, &f.fold.to_string(), &f.report));
        }
        let (ra, rs) = self.aggregate(|r| r.roc_auc);
        let (pa, ps) = self.aggregate(|r| r.pr_auc);
        let (ba, bs) = self.aggregate(|r| r.balanced_accuracy);
        let (np, nn) = self
            .folds
            .iter()
            .fold((0, 0), |(p, n), f| (p + f.report.n_pos, n + f.report.n_neg));
        s.push_str(&format!("{},mean,{ra},{pa},{ba},{np},{nn}\n", self.protocol));
        s.push_str(&format!("{},sd,{rs},{ps},{bs},{np},{nn}\n", self.protocol));
        s
    }
}

pub const METRICS_HEADER: &str = "protocol,fold,roc_auc,pr_auc,balanced_accuracy,n_pos,n_neg\n";

pub fn metrics_row(protocol: &str, fold: &str, r: &MetricReport) -> String {
    format!(
        "{protocol},{fold},{},{},{},{},{}\n",
        r.roc_auc, r.pr_auc, r.balanced_accuracy, r.n_pos, r.n_neg
    )
}

/// Runs one fold: scalers and undersampling see the training pairs only;
/// a fresh model is trained with seed derived from `(plan.seed, fold)`.
pub fn run_fold<T: Scalar>(
    trainer: &Trainer,
    ds: &PairDataset<T>,
    plan: &SplitPlan,
    fold: usize,
) -> Result<FoldResult<T>> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let scalers = Scalers::fit(&ds.subset(&train_idx))?;
    let scaled = scalers.apply_pairs(ds)?;
    let fold_seed = derive_seed(plan.seed, "fold", &[fold as u64]);
    let train_raw = scaled.subset(&train_idx);
    let balanced = undersample_indices(&train_raw, fold_seed)?;
    let train = train_raw.subset(&balanced);
    let model = trainer.with_seed(fold_seed).fit(&train, &mut TrainLog::default())?;
    let report = evaluate(&model, &scaled.subset(&test_idx))?;
    Ok(FoldResult {
        fold,
        report,
        scalers,
        train_indices: balanced.iter().map(|&i| train_idx[i]).collect(),
    })
}

/// All folds of `plan`, optionally on `jobs` threads; results are ordered
/// by fold either way.
pub fn cross_validate<T: Scalar>(
    trainer: &Trainer,
    ds: &PairDataset<T>,
    plan: &SplitPlan,
    jobs: usize,
) -> Result<CvSummary<T>> {
    if plan.assignments.len() != ds.len() {
        return Err(Error::InvalidInput(format!(
            "plan covers {} pairs, dataset has {}",
            plan.assignments.len(),
            ds.len()
        )));
    }
    let folds: Vec<usize> = (0..plan.folds).collect();
    let run = |&f: &usize| run_fold(trainer, ds, plan, f);
    let folds: Vec<FoldResult<T>> = if jobs <= 1 {
        folds.iter().map(run).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| folds.par_iter().map(run).collect::<Result<_>>())?
    };
    Ok(CvSummary {
        protocol: plan.protocol.to_string(),
        folds,
    })
}

/// Zero-shot evaluation on a target dataset already reindexed to the model's
/// schema and scaled with source scalers.
pub fn evaluate_cross_dataset<T: Scalar>(model: &PredictionModel<T>, target: &PairDataset<T>) -> Result<MetricReport> {
    if let (Some(m), Some(t)) = (model.schema_hash(), target.schema_hash()) {
        if m != t {
            return Err(Error::SchemaMismatch {
                expected: hex::encode(m),
                found: hex::encode(t),
            });
        }
    }
    evaluate(model, target)
}
