//! Few-shot learning curves: per-run metrics and per-shot aggregates.

use std::collections::BTreeMap;

use crate::data::PairDataset;
use crate::error::Result;
use crate::eval::metrics::{mean_sd, MetricReport};
use crate::model::PredictionModel;
use crate::nn::TrainConfig;
use crate::pipeline::{phase3_fewshot, FewShotSpec};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub shots: usize,
    pub run: usize,
    pub stratified: bool,
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FewShotCurve {
    pub shot_counts: Vec<usize>,
    /// Ordered by (run, shots).
    pub points: Vec<CurvePoint>,
}

/// Mean and population s.d. of one metric at one shot count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveStat {
    pub mean: f64,
    pub sd: f64,
}

impl FewShotCurve {
    pub fn values(&self, shots: usize, metric: impl Fn(&MetricReport) -> f64) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.shots == shots)
            .map(|p| metric(&p.report))
            .collect()
    }

    pub fn stat(&self, shots: usize, metric: impl Fn(&MetricReport) -> f64) -> CurveStat {
        let (mean, sd) = mean_sd(&self.values(shots, metric));
        CurveStat { mean, sd }
    }

    pub fn mean_roc_auc(&self) -> BTreeMap<usize, f64> {
        self.shot_counts
            .iter()
            .map(|&k| (k, self.stat(k, |r| r.roc_auc).mean))
            .collect()
    }

    /// `shot_count,run,roc_auc,pr_auc`.
    pub fn runs_table(&self) -> String {
        let mut s = String::from("shot_count,run,roc_auc,pr_auc\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{}\n",
                p.shots, p.run, p.report.roc_auc, p.report.pr_auc
            ));
        }
        s
    }

    /// `shot_count,metric,mean,sd`.
    pub fn aggregate_table(&self) -> String {
        let mut s = String::from("shot_count,metric,mean,sd\n");
        let metrics: [(&str, fn(&MetricReport) -> f64); 3] = [
            ("roc_auc", |r| r.roc_auc),
            ("pr_auc", |r| r.pr_auc),
            ("balanced_accuracy", |r| r.balanced_accuracy),
        ];
        for &k in &self.shot_counts {
            for (name, f) in metrics {
                let st = self.stat(k, f);
                s.push_str(&format!("{k},{name},{},{}\n", st.mean, st.sd));
            }
        }
        s
    }

    /// Mean ROC-AUC against shot count with a ±1 s.d. band.
    pub fn to_svg(&self, title: &str) -> String {
        let series: Vec<(f64, f64, f64)> = self
            .shot_counts
            .iter()
            .map(|&k| {
                let st = self.stat(k, |r| r.roc_auc);
                (k as f64, st.mean, st.sd)
            })
            .collect();
        crate::plot::line_band_svg(title, "labeled target pairs", "ROC-AUC", &series)
    }
}

/// Runs the few-shot grid on `model` and collects the curve.
pub fn fewshot_curve<T: Scalar>(
    model: &PredictionModel<T>,
    patient: &PairDataset<T>,
    spec: &FewShotSpec,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<FewShotCurve> {
    let runs = phase3_fewshot(model, patient, spec, cfg, jobs)?;
    Ok(FewShotCurve {
        shot_counts: spec.shot_counts.clone(),
        points: runs
            .into_iter()
            .map(|r| CurvePoint {
                shots: r.shots,
                run: r.run,
                stratified: r.stratified,
                report: r.report,
            })
            .collect(),
    })
}
