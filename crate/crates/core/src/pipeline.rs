//! The three training phases and the matched single-phase baseline.
//!
//! * Phase 1 pretrains the cell and drug autoencoders on feature matrices
//!   alone; its signature has no access to labels.
//! * Phase 2 fine-tunes both encoders jointly with the head on labeled pairs
//!   (BCE only unless a reconstruction weight is configured).
//! * Phase 3 adapts a copy of the aligned model to a handful of labeled
//!   target pairs per (run, shot count), keeping the drug encoder fixed.
//! * The baseline trains everything at once on `MSE_cell + MSE_drug + BCE`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::PairDataset;
use crate::error::{Error, Result};
use crate::eval::MetricReport;
use crate::model::{
    init_stream, with_provenance, Autoencoder, ModelConfig, PhaseTag, PredictionHead, PredictionModel, Provenance,
};
use crate::nn::{bce_logit_grad, bce_loss, mse_loss, LayerOptim, Matrix, TrainConfig};
use crate::preprocess::{stratified_counts, stratified_split, SplitAssignment};
use crate::rng::{derive_seed, RngState, StreamRng};
use crate::scalar::Scalar;

/// One row of a training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub phase: String,
    pub epoch: usize,
    pub loss: f64,
    pub wall_time: f64,
}

/// Per-epoch losses of one or more phases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    fn push(&mut self, phase: &str, epoch: usize, loss: f64, started: Instant) {
        self.rows.push(LogRow {
            phase: phase.to_string(),
            epoch,
            loss,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }

    /// `phase,epoch,loss,wall_time` table.
    pub fn to_table(&self) -> String {
        let mut s = String::from("phase,epoch,loss,wall_time\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{:.6}\n", r.phase, r.epoch, r.loss, r.wall_time));
        }
        s
    }

    pub fn losses(&self, phase: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.phase == phase).map(|r| r.loss).collect()
    }
}

fn epoch_order(n: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

fn check_loss<T: Scalar>(loss: T, phase: &str, epoch: usize, batch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            phase: phase.to_string(),
            epoch,
            batch,
        })
    }
}

/// Autoencoders produced by phase 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Pretrained<T> {
    pub cell_ae: Autoencoder<T>,
    pub drug_ae: Autoencoder<T>,
    pub(crate) seed: u64,
}

impl<T: Scalar> Pretrained<T> {
    /// Wraps the autoencoders with the head alignment would start from, so
    /// the pair can be checkpointed between phases.
    pub fn into_model(self, arch: &ModelConfig) -> Result<PredictionModel<T>> {
        let head = PredictionHead::init(
            self.cell_ae.latent_dim() + self.drug_ae.latent_dim(),
            arch.head_hidden,
            &mut init_stream(self.seed, "head"),
        )?;
        let mut model = PredictionModel::from_parts(self.cell_ae, self.drug_ae, head, Provenance::Staged)?;
        model.push_phase(PhaseTag::P1Pretrain);
        model.rng_state = RngState {
            seed: self.seed,
            position: 0,
        };
        Ok(model)
    }

    /// Inverse of [`Pretrained::into_model`]; only pretrain-only models qualify.
    pub fn from_model(model: PredictionModel<T>) -> Result<Self> {
        if model.phase_history() != [PhaseTag::P1Pretrain] || model.provenance() != Provenance::Staged {
            return Err(Error::PhaseOrder(format!(
                "expected a pretrained-only staged model, found history [{}]",
                history_string(&model)
            )));
        }
        Ok(Pretrained {
            seed: model.rng_state.seed,
            cell_ae: model.cell_ae,
            drug_ae: model.drug_ae,
        })
    }
}

fn history_string<T: Scalar>(model: &PredictionModel<T>) -> String {
    model
        .phase_history()
        .iter()
        .map(|p| p.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn train_autoencoder<T: Scalar>(
    ae: &mut Autoencoder<T>,
    x: &Matrix<T>,
    cfg: &TrainConfig,
    phase: &str,
    log: &mut TrainLog,
) -> Result<()> {
    let mut rng = StreamRng::derived(cfg.seed, &format!("shuffle/{phase}"), &[]);
    let mut enc_opt = ae.encoder.new_optim();
    let mut dec_opt = ae.decoder.new_optim();
    let started = Instant::now();
    for epoch in 0..cfg.epochs {
        let order = epoch_order(x.rows(), &mut rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select_rows(idx);
            let (z, enc_cache) = ae.encoder.forward(&xb)?;
            let (recon, dec_cache) = ae.decoder.forward(&z)?;
            let (loss, grad) = mse_loss(&recon, &xb)?;
            check_loss(loss, phase, epoch, b)?;
            let (gz, dec_grads) = ae.decoder.backward(&dec_cache, &grad)?;
            let (_, enc_grads) = ae.encoder.backward(&enc_cache, &gz)?;
            ae.decoder
                .adam_update(&format!("{phase}.decoder"), &dec_grads, &mut dec_opt, cfg)?;
            ae.encoder
                .adam_update(&format!("{phase}.encoder"), &enc_grads, &mut enc_opt, cfg)?;
            total += loss.to_f64_exact() * idx.len() as f64;
        }
        log.push(phase, epoch, total / x.rows().max(1) as f64, started);
    }
    Ok(())
}

/// Pretrains both autoencoders on reconstruction. Inputs are feature
/// matrices only; no labels reach this phase.
pub fn phase1_pretrain<T: Scalar>(
    cell_matrix: &Matrix<T>,
    drug_matrix: &Matrix<T>,
    arch: &ModelConfig,
    cfg: &TrainConfig,
    log: &mut TrainLog,
) -> Result<Pretrained<T>> {
    cfg.validate()?;
    arch.validate()?;
    let mut cell_ae = Autoencoder::init(
        cell_matrix.cols(),
        arch.cell_latent,
        &arch.encoder_hidden,
        &mut init_stream(cfg.seed, "cell_ae"),
    )?;
    let mut drug_ae = Autoencoder::init(
        drug_matrix.cols(),
        arch.drug_latent,
        &arch.encoder_hidden,
        &mut init_stream(cfg.seed, "drug_ae"),
    )?;
    train_autoencoder(&mut cell_ae, cell_matrix, cfg, "P1_Pretrain_cell", log)?;
    train_autoencoder(&mut drug_ae, drug_matrix, cfg, "P1_Pretrain_drug", log)?;
    Ok(Pretrained {
        cell_ae,
        drug_ae,
        seed: cfg.seed,
    })
}

/// Which parameter groups a joint training step updates.
#[derive(Clone, Copy, Debug)]
struct Scope {
    cell_encoder: bool,
    drug_encoder: bool,
    head: bool,
    /// Weight of the reconstruction terms; decoders train only when > 0.
    recon_weight: f64,
}

struct JointOptim<T> {
    cell_enc: Vec<LayerOptim<T>>,
    cell_dec: Vec<LayerOptim<T>>,
    drug_enc: Vec<LayerOptim<T>>,
    drug_dec: Vec<LayerOptim<T>>,
    head: Vec<LayerOptim<T>>,
}

impl<T: Scalar> JointOptim<T> {
    fn for_model(m: &PredictionModel<T>) -> Self {
        JointOptim {
            cell_enc: m.cell_ae.encoder.new_optim(),
            cell_dec: m.cell_ae.decoder.new_optim(),
            drug_enc: m.drug_ae.encoder.new_optim(),
            drug_dec: m.drug_ae.decoder.new_optim(),
            head: m.head.net.new_optim(),
        }
    }
}

fn add_scaled<T: Scalar>(acc: &mut Matrix<T>, g: &Matrix<T>, w: T) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *a = *a + w * *b;
    }
}

fn joint_step<T: Scalar>(
    model: &mut PredictionModel<T>,
    data: &PairDataset<T>,
    idx: &[usize],
    scope: Scope,
    opt: &mut JointOptim<T>,
    cfg: &TrainConfig,
) -> Result<T> {
    let cell_x = data.cell_batch(idx);
    let drug_x = data.drug_batch(idx);
    let labels: Vec<T> = idx.iter().map(|&i| data.pair(i).label.value()).collect();
    let recon = scope.recon_weight > 0.0;
    let w = T::lit(scope.recon_weight);

    let (zc, cell_cache) = model.cell_ae.encoder.forward(&cell_x)?;
    let drug_needs_cache = scope.drug_encoder || recon;
    let (zd, drug_cache) = if drug_needs_cache {
        let (z, c) = model.drug_ae.encoder.forward(&drug_x)?;
        (z, Some(c))
    } else {
        (model.drug_ae.encoder.infer(&drug_x)?, None)
    };
    let joint = Matrix::hconcat(&zc, &zd)?;
    let (p, head_cache) = model.head.net.forward(&joint)?;
    let (mut loss, _) = bce_loss(p.as_slice(), &labels)?;
    let delta = Matrix::from_vec(p.rows(), 1, bce_logit_grad(p.as_slice(), &labels)?)?;
    let (g_joint, head_grads) = model.head.net.backward_pre(&head_cache, &delta)?;
    let (mut g_zc, mut g_zd) = g_joint.split_cols(zc.cols());

    let mut dec_grads = None;
    if recon {
        let (rc, rc_cache) = model.cell_ae.decoder.forward(&zc)?;
        let (rd, rd_cache) = model.drug_ae.decoder.forward(&zd)?;
        let (lc, gc) = mse_loss(&rc, &cell_x)?;
        let (ld, gd) = mse_loss(&rd, &drug_x)?;
        loss = loss + w * (lc + ld);
        let (gzc_r, cdg) = model.cell_ae.decoder.backward(&rc_cache, &gc)?;
        let (gzd_r, ddg) = model.drug_ae.decoder.backward(&rd_cache, &gd)?;
        add_scaled(&mut g_zc, &gzc_r, w);
        add_scaled(&mut g_zd, &gzd_r, w);
        let scale = |gs: Vec<crate::nn::LayerGrads<T>>| {
            gs.into_iter()
                .map(|mut g| {
                    g.weights.as_mut_slice().iter_mut().for_each(|v| *v = *v * w);
                    g.bias.iter_mut().for_each(|v| *v = *v * w);
                    g
                })
                .collect::<Vec<_>>()
        };
        dec_grads = Some((scale(cdg), scale(ddg)));
    }

    let cell_grads = if scope.cell_encoder {
        Some(model.cell_ae.encoder.backward(&cell_cache, &g_zc)?.1)
    } else {
        None
    };
    let drug_grads = match (&drug_cache, scope.drug_encoder) {
        (Some(c), true) => Some(model.drug_ae.encoder.backward(c, &g_zd)?.1),
        _ => None,
    };

    if scope.head {
        model.head.net.adam_update("head", &head_grads, &mut opt.head, cfg)?;
    }
    if let Some(g) = cell_grads {
        model
            .cell_ae
            .encoder
            .adam_update("cell_ae.encoder", &g, &mut opt.cell_enc, cfg)?;
    }
    if let Some(g) = drug_grads {
        model
            .drug_ae
            .encoder
            .adam_update("drug_ae.encoder", &g, &mut opt.drug_enc, cfg)?;
    }
    if let Some((cg, dg)) = dec_grads {
        model
            .cell_ae
            .decoder
            .adam_update("cell_ae.decoder", &cg, &mut opt.cell_dec, cfg)?;
        model
            .drug_ae
            .decoder
            .adam_update("drug_ae.decoder", &dg, &mut opt.drug_dec, cfg)?;
    }
    Ok(loss)
}

fn train_joint<T: Scalar>(
    model: &mut PredictionModel<T>,
    data: &PairDataset<T>,
    scope: Scope,
    cfg: &TrainConfig,
    rng: &mut StreamRng,
    phase: &str,
    log: &mut TrainLog,
) -> Result<()> {
    let mut opt = JointOptim::for_model(model);
    let started = Instant::now();
    for epoch in 0..cfg.epochs {
        let order = epoch_order(data.len(), rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let loss = joint_step(model, data, idx, scope, &mut opt, cfg)?;
            check_loss(loss, phase, epoch, b)?;
            total += loss.to_f64_exact() * idx.len() as f64;
        }
        log.push(phase, epoch, total / data.len().max(1) as f64, started);
    }
    model.rng_state = rng.state();
    Ok(())
}

fn require_both_classes<T: Scalar>(data: &PairDataset<T>, what: &str) -> Result<()> {
    let (neg, pos) = data.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::InvalidInput(format!(
            "{what} needs both classes ({pos} positive, {neg} negative pairs)"
        )));
    }
    Ok(())
}

fn check_dims<T: Scalar>(model: &PredictionModel<T>, data: &PairDataset<T>) -> Result<()> {
    let want = (model.cell_ae.input_dim(), model.drug_ae.input_dim());
    let got = (data.cell_matrix().n_features(), data.drug_matrix().n_features());
    if want != got {
        return Err(Error::shape(
            "pair dataset features",
            format!("{want:?}"),
            format!("{got:?}"),
        ));
    }
    Ok(())
}

/// Options of the alignment phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlignOptions {
    /// Weight of an auxiliary reconstruction term; 0 keeps decoders frozen.
    pub recon_weight: f64,
}

/// Jointly fine-tunes the pretrained encoders with a fresh head on BCE.
pub fn phase2_align<T: Scalar>(
    pretrained: Pretrained<T>,
    labeled_train: &PairDataset<T>,
    arch: &ModelConfig,
    cfg: &TrainConfig,
    opts: AlignOptions,
    log: &mut TrainLog,
) -> Result<PredictionModel<T>> {
    cfg.validate()?;
    require_both_classes(labeled_train, "alignment")?;
    let head = PredictionHead::init(
        pretrained.cell_ae.latent_dim() + pretrained.drug_ae.latent_dim(),
        arch.head_hidden,
        &mut init_stream(pretrained.seed, "head"),
    )?;
    let mut model = PredictionModel::from_parts(pretrained.cell_ae, pretrained.drug_ae, head, Provenance::Staged)?;
    model.push_phase(PhaseTag::P1Pretrain);
    check_dims(&model, labeled_train)?;
    let scope = Scope {
        cell_encoder: true,
        drug_encoder: true,
        head: true,
        recon_weight: opts.recon_weight,
    };
    let mut rng = StreamRng::derived(cfg.seed, "shuffle/P2_Align", &[]);
    train_joint(&mut model, labeled_train, scope, cfg, &mut rng, "P2_Align", log)?;
    model.push_phase(PhaseTag::P2Align);
    Ok(model)
}

/// Options of the single-phase baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineOptions {
    /// Weight on `MSE_cell + MSE_drug` relative to BCE.
    pub recon_weight: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions { recon_weight: 1.0 }
    }
}

/// Trains both autoencoders and the head end to end on labeled pairs.
pub fn baseline_train<T: Scalar>(
    labeled_train: &PairDataset<T>,
    arch: &ModelConfig,
    cfg: &TrainConfig,
    opts: BaselineOptions,
    log: &mut TrainLog,
) -> Result<PredictionModel<T>> {
    cfg.validate()?;
    require_both_classes(labeled_train, "baseline training")?;
    let model = crate::model::build_model(
        labeled_train.cell_matrix().n_features(),
        labeled_train.drug_matrix().n_features(),
        arch,
        cfg.seed,
    )?;
    let mut model = with_provenance(model, Provenance::SinglePhaseBaseline);
    let scope = Scope {
        cell_encoder: true,
        drug_encoder: true,
        head: true,
        recon_weight: opts.recon_weight,
    };
    let mut rng = StreamRng::derived(cfg.seed, "shuffle/Baseline", &[]);
    train_joint(
        &mut model,
        labeled_train,
        scope,
        cfg,
        &mut rng,
        "BaselineSinglePhase",
        log,
    )?;
    model.push_phase(PhaseTag::BaselineSinglePhase);
    Ok(model)
}

/// Parameters adapted in phase 3. The drug encoder is never adapted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaptScope {
    CellEncoderOnly,
    CellEncoderAndHead,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FewShotSpec {
    /// Strictly increasing; 0 means zero-shot evaluation.
    pub shot_counts: Vec<usize>,
    pub runs: usize,
    pub adapt_scope: AdaptScope,
    pub seed_base: u64,
}

impl Default for FewShotSpec {
    fn default() -> Self {
        FewShotSpec {
            shot_counts: vec![0, 10, 20, 50, 100],
            runs: 5,
            adapt_scope: AdaptScope::CellEncoderAndHead,
            seed_base: 42,
        }
    }
}

impl FewShotSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("few-shot runs must be at least 1".into()));
        }
        if self.shot_counts.is_empty() || self.shot_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "shot counts must be non-empty and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Fine-tunes `model` on `shots` in place under `scope`.
pub fn adapt<T: Scalar>(
    model: &mut PredictionModel<T>,
    shots: &PairDataset<T>,
    scope: AdaptScope,
    cfg: &TrainConfig,
    rng: &mut StreamRng,
    log: &mut TrainLog,
) -> Result<()> {
    require_phase2(model)?;
    check_dims(model, shots)?;
    let scope = Scope {
        cell_encoder: true,
        drug_encoder: false,
        head: scope == AdaptScope::CellEncoderAndHead,
        recon_weight: 0.0,
    };
    train_joint(model, shots, scope, cfg, rng, "P3_FewShot", log)?;
    model.push_phase(PhaseTag::P3FewShot);
    Ok(())
}

fn require_phase2<T: Scalar>(model: &PredictionModel<T>) -> Result<()> {
    let ok = model
        .phase_history()
        .iter()
        .any(|p| matches!(p, PhaseTag::P2Align | PhaseTag::BaselineSinglePhase));
    if ok {
        Ok(())
    } else {
        Err(Error::PhaseOrder(format!(
            "few-shot adaptation needs a supervised model; history is [{}]",
            history_string(model)
        )))
    }
}

/// Fixed stratified 50% evaluation holdout of the target pairs; the
/// remaining pairs form the few-shot pool.
pub fn patient_holdout<T: Scalar>(patient: &PairDataset<T>, seed_base: u64) -> Result<SplitAssignment> {
    stratified_split(patient, 0.5, derive_seed(seed_base, "holdout", &[]))
}

/// Draws `k` pool indices, stratified when both classes can be represented.
/// Returns the indices and whether the draw was stratified.
pub fn draw_shots<T: Scalar>(
    data: &PairDataset<T>,
    pool: &[usize],
    k: usize,
    rng: &mut StreamRng,
) -> Result<(Vec<usize>, bool)> {
    if k > pool.len() {
        return Err(Error::InvalidInput(format!(
            "{k} shots requested but only {} pool pairs available",
            pool.len()
        )));
    }
    let mut by_class = [Vec::new(), Vec::new()];
    for &i in pool {
        by_class[data.pair(i).label.as_u8() as usize].push(i);
    }
    if k < 2 || by_class.iter().any(Vec::is_empty) {
        let mut all = pool.to_vec();
        all.shuffle(rng);
        all.truncate(k);
        return Ok((all, false));
    }
    let sizes = [by_class[0].len(), by_class[1].len()];
    let mut counts = stratified_counts(sizes, k as f64 / pool.len() as f64);
    // The one-per-class floor can overshoot; give the excess back from the larger class.
    while counts[0] + counts[1] > k {
        let big = if counts[0] >= counts[1] { 0 } else { 1 };
        counts[big] -= 1;
    }
    let mut out = Vec::with_capacity(k);
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(rng);
        out.extend_from_slice(&idx[..counts[c]]);
    }
    out.shuffle(rng);
    Ok((out, true))
}

/// Outcome of one (run, shot count) cell of the few-shot grid.
#[derive(Clone, Debug)]
pub struct FewShotRun<T> {
    pub run: usize,
    pub shots: usize,
    pub stratified: bool,
    pub report: MetricReport,
    pub model: PredictionModel<T>,
}

pub fn evaluate<T: Scalar>(model: &PredictionModel<T>, data: &PairDataset<T>) -> Result<MetricReport> {
    let all: Vec<usize> = (0..data.len()).collect();
    let scores = model.predict(&data.cell_batch(&all), &data.drug_batch(&all))?;
    let labels: Vec<bool> = data.pairs().iter().map(|p| p.label.is_positive()).collect();
    MetricReport::compute(&scores, &labels)
}

/// Runs the few-shot grid. Each (run, k) cell adapts a private copy of
/// `model` with its own stream and is evaluated on the shared holdout.
/// Results are ordered by (run, k) regardless of `jobs`.
pub fn phase3_fewshot<T: Scalar>(
    model: &PredictionModel<T>,
    patient: &PairDataset<T>,
    spec: &FewShotSpec,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<Vec<FewShotRun<T>>> {
    spec.validate()?;
    cfg.validate()?;
    require_phase2(model)?;
    check_dims(model, patient)?;
    let split = patient_holdout(patient, spec.seed_base)?;
    let holdout = patient.subset(&split.val_indices);
    let pool = split.train_indices;
    if let Some(&k) = spec.shot_counts.last() {
        if k > pool.len() {
            return Err(Error::InvalidInput(format!(
                "{k} shots requested but the few-shot pool holds {} pairs",
                pool.len()
            )));
        }
    }
    let zero_shot = evaluate(model, &holdout)?;
    let cells: Vec<(usize, usize)> = (0..spec.runs)
        .flat_map(|r| spec.shot_counts.iter().map(move |&k| (r, k)))
        .collect();
    let run_cell = |&(r, k): &(usize, usize)| -> Result<FewShotRun<T>> {
        if k == 0 {
            return Ok(FewShotRun {
                run: r,
                shots: 0,
                stratified: true,
                report: zero_shot,
                model: model.clone(),
            });
        }
        let mut rng = StreamRng::derived(spec.seed_base, "fewshot", &[r as u64, k as u64]);
        let (idx, stratified) = draw_shots(patient, &pool, k, &mut rng)?;
        let shots = patient.subset(&idx);
        let mut adapted = model.clone();
        let mut log = TrainLog::default();
        adapt(&mut adapted, &shots, spec.adapt_scope, cfg, &mut rng, &mut log)?;
        Ok(FewShotRun {
            run: r,
            shots: k,
            stratified,
            report: evaluate(&adapted, &holdout)?,
            model: adapted,
        })
    };
    if jobs <= 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    }
}

/// Which training route produces a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Staged,
    Baseline,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Staged => "staged",
            Method::Baseline => "baseline",
        }
    }
}

/// Everything needed to train a model from scaled, undersampled pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Trainer {
    pub method: Method,
    pub arch: ModelConfig,
    pub train: TrainConfig,
    pub align: AlignOptions,
    pub baseline: BaselineOptions,
}

impl Trainer {
    pub fn new(method: Method, arch: ModelConfig, train: TrainConfig) -> Self {
        Trainer {
            method,
            arch,
            train,
            align: AlignOptions::default(),
            baseline: BaselineOptions::default(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut t = self.clone();
        t.train.seed = seed;
        t
    }

    /// Staged training pretrains on the feature rows of the cells and drugs
    /// that `train` references, then aligns on its pairs.
    pub fn fit<T: Scalar>(&self, train: &PairDataset<T>, log: &mut TrainLog) -> Result<PredictionModel<T>> {
        match self.method {
            Method::Staged => {
                let cells = train.cell_matrix().values().select_rows(&train.cell_rows());
                let drugs = train.drug_matrix().values().select_rows(&train.drug_rows());
                let pre = phase1_pretrain(&cells, &drugs, &self.arch, &self.train, log)?;
                phase2_align(pre, train, &self.arch, &self.train, self.align, log)
            }
            Method::Baseline => baseline_train(train, &self.arch, &self.train, self.baseline, log),
        }
    }
}
