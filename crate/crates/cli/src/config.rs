//! Experiment configuration: TOML sections over every tunable, with unknown
//! keys rejected. Precedence is flags, then file, then defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stardr::eval::Protocol;
use stardr::model::ModelConfig;
use stardr::nn::TrainConfig;
use stardr::pipeline::{AdaptScope, AlignOptions, BaselineOptions, FewShotSpec};
use stardr::synthgen::ShiftConfig;
use stardr::{Error, Result};

pub const OUT_ENV: &str = "STARDR_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Every stage derives its streams from this one seed.
    pub seed: u64,
    pub jobs: usize,
    pub train: TrainSection,
    pub model: ModelSection,
    pub align: AlignSection,
    pub baseline: BaselineSection,
    pub fewshot: FewShotSection,
    pub synth: SynthSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            jobs: 1,
            train: TrainSection::default(),
            model: ModelSection::default(),
            align: AlignSection::default(),
            baseline: BaselineSection::default(),
            fewshot: FewShotSection::default(),
            synth: SynthSection::default(),
            eval: EvalSection::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub cell_latent: usize,
    pub drug_latent: usize,
    pub head_hidden: usize,
    pub encoder_hidden: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            cell_latent: m.cell_latent,
            drug_latent: m.drug_latent,
            head_hidden: m.head_hidden,
            encoder_hidden: m.encoder_hidden,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignSection {
    /// Auxiliary reconstruction weight; 0 keeps decoders frozen.
    pub recon_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub recon_weight: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection { recon_weight: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FewShotSection {
    pub shot_counts: Vec<usize>,
    pub runs: usize,
    /// `cell_encoder_and_head` or `cell_encoder`.
    pub adapt_scope: String,
    /// Refit the cell scaler on the target few-shot pool instead of reusing
    /// the source scaler.
    pub refit_scalers: bool,
}

impl Default for FewShotSection {
    fn default() -> Self {
        let f = FewShotSpec::default();
        FewShotSection {
            shot_counts: f.shot_counts,
            runs: f.runs,
            adapt_scope: "cell_encoder_and_head".into(),
            refit_scalers: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_cells_source: usize,
    pub n_cells_target: usize,
    pub n_drugs: usize,
    pub latent_dim_true: usize,
    pub feature_dim_cell: usize,
    pub feature_dim_drug: usize,
    pub shift_delta: f64,
    pub label_shift: f64,
    pub concept_shift: f64,
    pub noise_sigma: f64,
    pub drug_weight_ratio: f64,
    pub pair_fraction: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = ShiftConfig::default();
        SynthSection {
            n_cells_source: s.n_cells_source,
            n_cells_target: s.n_cells_target,
            n_drugs: s.n_drugs,
            latent_dim_true: s.latent_dim_true,
            feature_dim_cell: s.feature_dim_cell,
            feature_dim_drug: s.feature_dim_drug,
            shift_delta: s.shift_delta,
            label_shift: s.label_shift,
            concept_shift: s.concept_shift,
            noise_sigma: s.noise_sigma,
            drug_weight_ratio: s.drug_weight_ratio,
            pair_fraction: s.pair_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// `pair`, `lco` or `ldo`.
    pub protocol: String,
    pub folds: usize,
    /// `staged`, `baseline` or `both`.
    pub method: String,
    /// Source pairs held out for validation in `align` and `baseline`.
    pub val_fraction: f64,
    pub knn: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            protocol: "pair".into(),
            folds: 5,
            method: "both".into(),
            val_fraction: 0.1,
            knn: 10,
        }
    }
}

/// Empty strings mean "use the default", which is resolved against `out`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub out: String,
    pub source_cells: String,
    pub source_drugs: String,
    pub source_pairs: String,
    pub target_cells: String,
    pub target_drugs: String,
    pub target_pairs: String,
    /// Model read by `align`, `adapt`, `eval` and `analyze`.
    pub checkpoint: String,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub epochs: Option<usize>,
    pub protocol: Option<String>,
    pub folds: Option<usize>,
    pub method: Option<String>,
    pub shift_delta: Option<f64>,
    pub checkpoint: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Applies flags, fills default paths and checks every section.
    /// `checkpoint` names the command's default model file inside `out`.
    pub fn resolve(mut self, o: &Overrides, checkpoint: Option<&str>) -> Result<Self> {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = &o.protocol {
            self.eval.protocol = v.clone();
        }
        if let Some(v) = o.folds {
            self.eval.folds = v;
        }
        if let Some(v) = &o.method {
            self.eval.method = v.clone();
        }
        if let Some(v) = o.shift_delta {
            self.synth.shift_delta = v;
        }
        if let Some(v) = &o.checkpoint {
            self.paths.checkpoint = v.display().to_string();
        }
        if let Some(out) = &o.out {
            self.paths.out = out.display().to_string();
        }
        if self.paths.out.is_empty() {
            self.paths.out = std::env::var(OUT_ENV).unwrap_or_else(|_| "out".into());
        }
        let out = PathBuf::from(&self.paths.out);
        let fill = |slot: &mut String, name: &str| {
            if slot.is_empty() {
                *slot = out.join(name).display().to_string();
            }
        };
        let files = stardr::synthgen::SYNTH_FILES;
        fill(&mut self.paths.source_cells, files[0]);
        fill(&mut self.paths.target_cells, files[1]);
        fill(&mut self.paths.source_drugs, files[2]);
        fill(&mut self.paths.source_pairs, files[3]);
        fill(&mut self.paths.target_pairs, files[4]);
        if self.paths.target_drugs.is_empty() {
            self.paths.target_drugs = self.paths.source_drugs.clone();
        }
        if let Some(name) = checkpoint {
            fill(&mut self.paths.checkpoint, name);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.train_config().validate()?;
        self.model_config().validate()?;
        self.fewshot_spec()?.validate()?;
        self.shift_config().validate()?;
        self.protocol()?;
        self.methods()?;
        if self.eval.folds < 2 {
            return Err(Error::Config(format!(
                "eval.folds must be at least 2, got {}",
                self.eval.folds
            )));
        }
        if !(self.eval.val_fraction > 0.0 && self.eval.val_fraction < 1.0) {
            return Err(Error::Config("eval.val_fraction must lie in (0, 1)".into()));
        }
        if self.eval.knn == 0 {
            return Err(Error::Config("eval.knn must be at least 1".into()));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.paths.out)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: self.seed,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            cell_latent: self.model.cell_latent,
            drug_latent: self.model.drug_latent,
            head_hidden: self.model.head_hidden,
            encoder_hidden: self.model.encoder_hidden.clone(),
        }
    }

    pub fn align_options(&self) -> AlignOptions {
        AlignOptions {
            recon_weight: self.align.recon_weight,
        }
    }

    pub fn baseline_options(&self) -> BaselineOptions {
        BaselineOptions {
            recon_weight: self.baseline.recon_weight,
        }
    }

    pub fn fewshot_spec(&self) -> Result<FewShotSpec> {
        let adapt_scope = match self.fewshot.adapt_scope.as_str() {
            "cell_encoder_and_head" => AdaptScope::CellEncoderAndHead,
            "cell_encoder" => AdaptScope::CellEncoderOnly,
            other => {
                return Err(Error::Config(format!(
                    "fewshot.adapt_scope must be cell_encoder_and_head or cell_encoder, got {other:?}"
                )))
            }
        };
        Ok(FewShotSpec {
            shot_counts: self.fewshot.shot_counts.clone(),
            runs: self.fewshot.runs,
            adapt_scope,
            seed_base: self.seed,
        })
    }

    pub fn shift_config(&self) -> ShiftConfig {
        let s = &self.synth;
        ShiftConfig {
            n_cells_source: s.n_cells_source,
            n_cells_target: s.n_cells_target,
            n_drugs: s.n_drugs,
            latent_dim_true: s.latent_dim_true,
            feature_dim_cell: s.feature_dim_cell,
            feature_dim_drug: s.feature_dim_drug,
            shift_delta: s.shift_delta,
            label_shift: s.label_shift,
            concept_shift: s.concept_shift,
            noise_sigma: s.noise_sigma,
            drug_weight_ratio: s.drug_weight_ratio,
            pair_fraction: s.pair_fraction,
            seed: self.seed,
        }
    }

    pub fn protocol(&self) -> Result<Protocol> {
        self.eval.protocol.parse()
    }

    pub fn methods(&self) -> Result<Vec<stardr::Method>> {
        use stardr::Method;
        match self.eval.method.as_str() {
            "staged" => Ok(vec![Method::Staged]),
            "baseline" => Ok(vec![Method::Baseline]),
            "both" => Ok(vec![Method::Staged, Method::Baseline]),
            other => Err(Error::Config(format!(
                "eval.method must be staged, baseline or both, got {other:?}"
            ))),
        }
    }
}
