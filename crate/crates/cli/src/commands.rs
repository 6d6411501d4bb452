//! One function per subcommand. Each reads the resolved config, records
//! inputs and outputs in a [`Run`], and leaves the manifest to the caller.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use stardr::data::{build_schema, load_feature_matrix, load_response_pairs, reindex_to_schema, DatasetTag};
use stardr::eval::{
    cross_validate, evaluate_cross_dataset, make_split_plan, metrics_row, CurvePoint, FewShotCurve, METRICS_HEADER,
};
use stardr::latent::{shift_view, AnalysisTable, EmbeddingStats};
use stardr::pipeline::{
    baseline_train, evaluate, patient_holdout, phase1_pretrain, phase2_align, phase3_fewshot, Pretrained,
};
use stardr::preprocess::{fit_minmax_rows, stratified_split, undersample};
use stardr::synthgen::{generate, write_synth, SYNTH_FILES};
use stardr::{
    load_checkpoint, save_checkpoint, Checkpoint, Error, FeatureMatrix, FeatureSchema, Matrix, MetricReport,
    ModalityKind, PairDataset, Result, Scalers, TrainLog, Trainer,
};

use crate::config::ExperimentConfig;
use crate::manifest::Run;

type F = f64;

fn require(path: &str, what: &str, hint: &str) -> Result<PathBuf> {
    let p = PathBuf::from(path);
    if !p.is_file() {
        return Err(Error::InvalidInput(format!("{what} `{path}` not found; {hint}")));
    }
    Ok(p)
}

const SYNTH_HINT: &str = "run `stardr synth` first or set the [paths] entry";

fn load_matrix(run: &mut Run, path: &str, kind: ModalityKind, what: &str) -> Result<FeatureMatrix<F>> {
    let p = require(path, what, SYNTH_HINT)?;
    run.input(&p);
    load_feature_matrix(&p, kind)
}

fn load_pairs(
    run: &mut Run,
    path: &str,
    cells: FeatureMatrix<F>,
    drugs: FeatureMatrix<F>,
    tag: DatasetTag,
    schema: &FeatureSchema,
) -> Result<PairDataset<F>> {
    let p = require(path, "pair table", SYNTH_HINT)?;
    run.input(&p);
    let loaded = load_response_pairs(&p, Arc::new(cells), Arc::new(drugs), tag)?;
    if loaded.dropped > 0 {
        eprintln!(
            "warning: {}: dropped {} pairs with unknown cell or drug ids",
            p.display(),
            loaded.dropped
        );
    }
    if loaded.dataset.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no pair resolves against the feature tables",
            p.display()
        )));
    }
    Ok(loaded.dataset.with_schema_hash(schema.digest()))
}

/// Source pairs plus the schema fixed on the source feature tables.
fn load_source(cfg: &ExperimentConfig, run: &mut Run) -> Result<(FeatureSchema, PairDataset<F>)> {
    let cells = load_matrix(run, &cfg.paths.source_cells, ModalityKind::Cell, "source cell table")?;
    let drugs = load_matrix(run, &cfg.paths.source_drugs, ModalityKind::Drug, "source drug table")?;
    let schema = build_schema("source", &[&cells], &[&drugs])?;
    let ds = load_pairs(
        run,
        &cfg.paths.source_pairs,
        cells,
        drugs,
        DatasetTag::SourceCellLine,
        &schema,
    )?;
    Ok((schema, ds))
}

/// Target pairs reindexed to the source schema, unscaled.
fn load_target(cfg: &ExperimentConfig, run: &mut Run, schema: &FeatureSchema) -> Result<PairDataset<F>> {
    let cells = load_matrix(run, &cfg.paths.target_cells, ModalityKind::Cell, "target cell table")?;
    let drugs = load_matrix(run, &cfg.paths.target_drugs, ModalityKind::Drug, "target drug table")?;
    let cells = reindex_to_schema(&cells, schema, ModalityKind::Cell)?;
    let drugs = reindex_to_schema(&drugs, schema, ModalityKind::Drug)?;
    load_pairs(run, &cfg.paths.target_pairs, cells, drugs, DatasetTag::Patient, schema)
}

/// The source split every training command shares: scalers fit on the
/// training pairs, training pairs undersampled.
struct SourceSplit {
    scalers: Scalers<F>,
    train: PairDataset<F>,
    val: PairDataset<F>,
}

fn split_source(cfg: &ExperimentConfig, source: &PairDataset<F>) -> Result<SourceSplit> {
    let split = stratified_split(source, cfg.eval.val_fraction, cfg.seed)?;
    let scalers = Scalers::fit(&source.subset(&split.train_indices))?;
    let scaled = scalers.apply_pairs(source)?;
    Ok(SourceSplit {
        train: undersample(&scaled.subset(&split.train_indices), cfg.seed)?,
        val: scaled.subset(&split.val_indices),
        scalers,
    })
}

fn load_model(cfg: &ExperimentConfig, run: &mut Run, schema: &FeatureSchema, hint: &str) -> Result<Checkpoint<F>> {
    let p = require(&cfg.paths.checkpoint, "checkpoint", hint)?;
    run.input(&p);
    load_checkpoint(&p, Some(schema))
}

fn save_model(run: &mut Run, name: &str, ckpt: &Checkpoint<F>) -> Result<()> {
    let path = run.path(name);
    save_checkpoint(ckpt, &path)?;
    run.produced(path);
    Ok(())
}

fn stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

fn metrics_table(label: &str, fold: &str, r: &MetricReport) -> String {
    format!("{METRICS_HEADER}{}", metrics_row(label, fold, r))
}

pub fn synth(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let data = generate::<F>(&cfg.shift_config())?;
    write_synth(&data, run.out())?;
    for name in SYNTH_FILES {
        run.produced(run.path(name));
    }
    Ok(())
}

pub fn pretrain(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let (schema, source) = load_source(cfg, run)?;
    let split = split_source(cfg, &source)?;
    let arch = cfg.model_config();
    for w in arch.warnings(schema.cell_features.len(), schema.drug_features.len()) {
        eprintln!("warning: {w}");
    }
    // Unlabeled feature rows of the entities the training pairs reference.
    let cells = split.train.cell_matrix().values().select_rows(&split.train.cell_rows());
    let drugs = split.train.drug_matrix().values().select_rows(&split.train.drug_rows());
    let mut log = TrainLog::default();
    let pre = phase1_pretrain(&cells, &drugs, &arch, &cfg.train_config(), &mut log)?;
    let mut model = pre.into_model(&arch)?;
    model.set_schema_hash(schema.digest());
    let schema_path = run.path("schema.txt");
    schema.save(&schema_path)?;
    run.produced(schema_path);
    save_model(
        run,
        "pretrained.ckpt",
        &Checkpoint {
            model,
            scalers: Some(split.scalers),
        },
    )?;
    run.write("train_log_pretrain.csv", log.to_table())?;
    Ok(())
}

pub fn align(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let (schema, source) = load_source(cfg, run)?;
    let ckpt = load_model(cfg, run, &schema, "run `stardr pretrain` first or pass --checkpoint")?;
    let split = split_source(cfg, &source)?;
    if ckpt.scalers.as_ref() != Some(&split.scalers) {
        return Err(Error::InvalidInput(
            "checkpoint scalers differ from this config's source split; rerun pretrain with the same seed and val_fraction"
                .into(),
        ));
    }
    let pre = Pretrained::from_model(ckpt.model)?;
    let mut log = TrainLog::default();
    let mut model = phase2_align(
        pre,
        &split.train,
        &cfg.model_config(),
        &cfg.train_config(),
        cfg.align_options(),
        &mut log,
    )?;
    model.set_schema_hash(schema.digest());
    let report = evaluate(&model, &split.val)?;
    save_model(
        run,
        "aligned.ckpt",
        &Checkpoint {
            model,
            scalers: Some(split.scalers),
        },
    )?;
    run.write("metrics_align.csv", metrics_table("source_val", "val", &report))?;
    run.write("train_log_align.csv", log.to_table())?;
    Ok(())
}

pub fn baseline(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let (schema, source) = load_source(cfg, run)?;
    let split = split_source(cfg, &source)?;
    let mut log = TrainLog::default();
    let mut model = baseline_train(
        &split.train,
        &cfg.model_config(),
        &cfg.train_config(),
        cfg.baseline_options(),
        &mut log,
    )?;
    model.set_schema_hash(schema.digest());
    let report = evaluate(&model, &split.val)?;
    save_model(
        run,
        "baseline.ckpt",
        &Checkpoint {
            model,
            scalers: Some(split.scalers),
        },
    )?;
    run.write("metrics_baseline.csv", metrics_table("source_val", "val", &report))?;
    run.write("train_log_baseline.csv", log.to_table())?;
    Ok(())
}

fn checkpoint_scalers(ckpt: &Checkpoint<F>) -> Result<Scalers<F>> {
    ckpt.scalers
        .clone()
        .ok_or_else(|| Error::Checkpoint("checkpoint carries no scalers; it cannot score raw target data".into()))
}

pub fn adapt(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let (schema, _) = load_source(cfg, run)?;
    let ckpt = load_model(
        cfg,
        run,
        &schema,
        "run `stardr align` or `stardr baseline` first, or pass --checkpoint",
    )?;
    let target = load_target(cfg, run, &schema)?;
    let spec = cfg.fewshot_spec()?;
    let mut scalers = checkpoint_scalers(&ckpt)?;
    if cfg.fewshot.refit_scalers {
        // Only the few-shot pool is visible; the evaluation holdout stays unseen.
        let pool = target.subset(&patient_holdout(&target, spec.seed_base)?.train_indices);
        scalers.cell = fit_minmax_rows(pool.cell_matrix().values(), &pool.cell_rows())?;
    }
    let target = scalers.apply_pairs(&target)?;
    let runs = phase3_fewshot(&ckpt.model, &target, &spec, &cfg.train_config(), cfg.jobs)?;
    let curve = FewShotCurve {
        shot_counts: spec.shot_counts.clone(),
        points: runs
            .iter()
            .map(|r| CurvePoint {
                shots: r.shots,
                run: r.run,
                stratified: r.stratified,
                report: r.report,
            })
            .collect(),
    };
    let name = stem(&cfg.paths.checkpoint);
    run.write(&format!("{name}_fewshot_runs.csv"), curve.runs_table())?;
    run.write(&format!("{name}_fewshot_curve.csv"), curve.aggregate_table())?;
    run.write(
        &format!("{name}_fewshot_curve.svg"),
        curve.to_svg(&format!("Few-shot adaptation ({name})")),
    )?;
    // The first run at the largest shot count is kept as the adapted model.
    let k_max = *spec.shot_counts.last().expect("validated non-empty");
    let best = runs
        .into_iter()
        .find(|r| r.run == 0 && r.shots == k_max)
        .expect("grid covers run 0");
    save_model(
        run,
        &format!("{name}_adapted.ckpt"),
        &Checkpoint {
            model: best.model,
            scalers: Some(scalers),
        },
    )?;
    Ok(())
}

pub fn eval(cfg: &ExperimentConfig, run: &mut Run, cross_dataset: bool) -> Result<()> {
    let (schema, source) = load_source(cfg, run)?;
    let protocol = cfg.protocol()?;
    let plan = make_split_plan(&source, protocol, cfg.eval.folds, cfg.seed)?;
    for method in cfg.methods()? {
        let mut trainer = Trainer::new(method, cfg.model_config(), cfg.train_config());
        trainer.align = cfg.align_options();
        trainer.baseline = cfg.baseline_options();
        let summary = cross_validate(&trainer, &source, &plan, cfg.jobs)?;
        run.write(&format!("cv_{protocol}_{}.csv", method.as_str()), summary.to_table())?;
    }
    if cross_dataset {
        let ckpt = load_model(cfg, run, &schema, "pass --checkpoint with a trained model")?;
        let target = checkpoint_scalers(&ckpt)?.apply_pairs(&load_target(cfg, run, &schema)?)?;
        let report = evaluate_cross_dataset(&ckpt.model, &target)?;
        let name = stem(&cfg.paths.checkpoint);
        run.write(
            &format!("cross_dataset_{name}.csv"),
            metrics_table("cross_dataset", "all", &report),
        )?;
    }
    Ok(())
}

fn stacked(a: &Matrix<F>, b: &Matrix<F>) -> Result<Matrix<F>> {
    let mut rows = a.to_rows();
    rows.extend(b.to_rows());
    Matrix::from_rows(&rows)
}

/// Records the PCA and centroid distance of one view; returns its scatter plot.
fn record_view(
    table: &mut AnalysisTable,
    group: &str,
    source: &Matrix<F>,
    target: &Matrix<F>,
    title: &str,
) -> Result<String> {
    let v = shift_view(source, target)?;
    for (i, var) in v.pca.explained_variance.iter().enumerate() {
        table.push(group, format!("pc{}_variance", i + 1), *var);
    }
    table.push(group, "mahalanobis_centroid", v.mahalanobis.distance);
    table.push(
        group,
        "mahalanobis_ridged",
        if v.mahalanobis.ridged { 1.0 } else { 0.0 },
    );
    Ok(stardr::plot::scatter_svg(
        title,
        &[("source".to_string(), v.source), ("target".to_string(), v.target)],
        &[(0, 1, v.mahalanobis.distance)],
    ))
}

pub fn analyze(cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let (schema, source) = load_source(cfg, run)?;
    let target = load_target(cfg, run, &schema)?;
    // Raw expression view, min-max scaled on the source cells.
    let all_src: Vec<usize> = (0..source.cell_matrix().n_entities()).collect();
    let scaler = fit_minmax_rows(source.cell_matrix().values(), &all_src)?;
    let src = scaler.apply(source.cell_matrix().values())?;
    let tgt = scaler.apply(target.cell_matrix().values())?;
    let mut table = AnalysisTable::default();
    let svg = record_view(&mut table, "expression", &src, &tgt, "Expression PCA: source vs target")?;
    run.write("pca.svg", svg)?;
    if !cfg.paths.checkpoint.is_empty() {
        let ckpt = load_model(cfg, run, &schema, "pass --checkpoint with a trained model")?;
        let scalers = checkpoint_scalers(&ckpt)?;
        let enc = ckpt.model.cell_ae();
        let zs = enc.encode(&scalers.cell.apply(source.cell_matrix().values())?)?;
        let zt = enc.encode(&scalers.cell.apply(target.cell_matrix().values())?)?;
        let name = stem(&cfg.paths.checkpoint);
        let group = format!("embedding_{name}");
        let svg = record_view(&mut table, &group, &zs, &zt, &format!("Cell embedding PCA ({name})"))?;
        let stats = EmbeddingStats::compute(&stacked(&zs, &zt)?, cfg.eval.knn)?;
        table.push(&group, "knn_mean_radius", stats.mean_knn_radius);
        table.push(&group, "knn_radius_cv", stats.coefficient_of_variation);
        run.write(&format!("pca_{group}.svg"), svg)?;
    }
    run.write("analysis.csv", table.to_table())?;
    Ok(())
}
