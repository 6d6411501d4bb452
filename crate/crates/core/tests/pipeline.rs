mod common;

use common::{quick_cfg, small_prepared, tiny_arch};
use stardr::model::{build_model, ModelConfig, PhaseTag, Provenance};
use stardr::nn::{Matrix, TrainConfig};
use stardr::pipeline::{
    adapt, baseline_train, evaluate, phase1_pretrain, phase2_align, phase3_fewshot, AdaptScope, AlignOptions,
    BaselineOptions, FewShotSpec, Method, TrainLog, Trainer,
};
use stardr::rng::StreamRng;
use stardr::Error;

use rand::Rng;

fn rank3(n: usize, d: usize, seed: u64) -> Matrix<f64> {
    let mut rng = StreamRng::new(seed);
    let basis: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        rows.push(
            (0..d)
                .map(|j| (0..3).map(|k| c[k] * basis[k][j]).sum::<f64>() / 3.0)
                .collect::<Vec<_>>(),
        );
    }
    Matrix::from_rows(&rows).unwrap()
}

#[test]
fn pretraining_reconstructs_low_rank_data() {
    let x = rank3(128, 20, 1);
    let drugs = rank3(16, 6, 2);
    let arch = ModelConfig {
        encoder_hidden: Vec::new(),
        ..ModelConfig::default()
    };
    let mut log = TrainLog::default();
    let cfg = TrainConfig::default().with_epochs(60);
    let pre = phase1_pretrain(&x, &drugs, &arch, &cfg, &mut log).unwrap();
    assert_eq!(pre.cell_ae.latent_dim(), 700);
    let recon = pre.cell_ae.reconstruct(&x).unwrap();
    let mse: f64 = recon
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.as_slice().len() as f64;
    assert!(mse < 1e-3, "reconstruction mse {mse}");
}

#[test]
fn full_batch_small_lr_loss_does_not_increase() {
    let x = rank3(32, 8, 3);
    let arch = ModelConfig {
        cell_latent: 4,
        drug_latent: 2,
        head_hidden: 4,
        encoder_hidden: Vec::new(),
    };
    let cfg = TrainConfig {
        batch_size: 32,
        epochs: 40,
        learning_rate: 1e-4,
        ..TrainConfig::default()
    };
    let mut log = TrainLog::default();
    phase1_pretrain(&x, &x, &arch, &cfg, &mut log).unwrap();
    let losses = log.losses("P1_Pretrain_cell");
    assert_eq!(losses.len(), 40);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{losses:?}");
    }
}

#[test]
fn pretraining_is_seed_deterministic_and_label_blind() {
    let p = small_prepared(0.0, 5);
    let cells = p.train.cell_matrix().values();
    let drugs = p.train.drug_matrix().values();
    let run = || phase1_pretrain(cells, drugs, &tiny_arch(), &quick_cfg(3), &mut TrainLog::default()).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn alignment_fits_separable_pairs() {
    let d = common::medium_data(7);
    let p = stardr::experiment::prepare(&d.source, &d.target, 0.1, 7).unwrap();
    let cfg = quick_cfg(25);
    let mut log = TrainLog::default();
    let pre = phase1_pretrain(
        p.train.cell_matrix().values(),
        p.train.drug_matrix().values(),
        &tiny_arch(),
        &cfg,
        &mut log,
    )
    .unwrap();
    let model = phase2_align(pre, &p.train, &tiny_arch(), &cfg, AlignOptions::default(), &mut log).unwrap();
    let bce = *log.losses("P2_Align").last().unwrap();
    assert!(bce < 0.1, "final BCE {bce}");
    assert_eq!(model.phase_history(), &[PhaseTag::P1Pretrain, PhaseTag::P2Align]);
    assert_eq!(model.provenance(), Provenance::Staged);
}

#[test]
fn default_scale_head_input_is_750() {
    let m = build_model::<f64>(30, 10, &ModelConfig::default(), 0).unwrap();
    assert_eq!(m.head().input_dim(), 750);
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let p = small_prepared(0.0, 9);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..quick_cfg(2)
    };
    let mut log = TrainLog::default();
    let cells = p.train.cell_matrix().values();
    let drugs = p.train.drug_matrix().values();
    let pre = phase1_pretrain(cells, drugs, &tiny_arch(), &cfg, &mut log).unwrap();
    let fresh = build_model::<f64>(cells.cols(), drugs.cols(), &tiny_arch(), cfg.seed).unwrap();
    assert_eq!(pre.cell_ae, *fresh.cell_ae());
    let model = phase2_align(pre, &p.train, &tiny_arch(), &cfg, AlignOptions::default(), &mut log).unwrap();
    let all: Vec<usize> = (0..p.val.len()).collect();
    let (cx, dx) = (p.val.cell_batch(&all), p.val.drug_batch(&all));
    assert_eq!(model.predict(&cx, &dx).unwrap(), fresh.predict(&cx, &dx).unwrap());
}

#[test]
fn reconstruction_weight_trains_decoders_in_alignment() {
    let p = small_prepared(0.0, 10);
    let cfg = quick_cfg(2);
    let pre = phase1_pretrain(
        p.train.cell_matrix().values(),
        p.train.drug_matrix().values(),
        &tiny_arch(),
        &cfg,
        &mut TrainLog::default(),
    )
    .unwrap();
    let before = pre.cell_ae.decoder().clone();
    let plain = phase2_align(
        pre.clone(),
        &p.train,
        &tiny_arch(),
        &cfg,
        AlignOptions::default(),
        &mut TrainLog::default(),
    )
    .unwrap();
    assert_eq!(plain.cell_ae().decoder(), &before);
    let aux = AlignOptions { recon_weight: 0.5 };
    let with_recon = phase2_align(pre, &p.train, &tiny_arch(), &cfg, aux, &mut TrainLog::default()).unwrap();
    assert_ne!(with_recon.cell_ae().decoder(), &before);
}

#[test]
fn baseline_matches_staged_architecture_and_is_deterministic() {
    let p = small_prepared(0.0, 11);
    let cfg = quick_cfg(3);
    let staged = Trainer::new(Method::Staged, tiny_arch(), cfg.clone())
        .fit(&p.train, &mut TrainLog::default())
        .unwrap();
    let run = || {
        baseline_train(
            &p.train,
            &tiny_arch(),
            &cfg,
            BaselineOptions::default(),
            &mut TrainLog::default(),
        )
        .unwrap()
    };
    let base = run();
    assert_eq!(base.param_count(), staged.param_count());
    assert_eq!(base.provenance(), Provenance::SinglePhaseBaseline);
    assert_eq!(base.phase_history(), &[PhaseTag::BaselineSinglePhase]);
    assert_eq!(base, run());
}

fn aligned(seed: u64) -> (stardr::experiment::Prepared<f64>, stardr::PredictionModel<f64>) {
    let p = small_prepared(2.0, seed);
    let m = Trainer::new(Method::Staged, tiny_arch(), quick_cfg(5))
        .fit(&p.train, &mut TrainLog::default())
        .unwrap();
    (p, m)
}

#[test]
fn adaptation_freezes_drug_encoder() {
    let (p, model) = aligned(12);
    for scope in [AdaptScope::CellEncoderOnly, AdaptScope::CellEncoderAndHead] {
        let mut m = model.clone();
        let shots = p.target.subset(&(0..20).collect::<Vec<_>>());
        adapt(
            &mut m,
            &shots,
            scope,
            &quick_cfg(5),
            &mut StreamRng::new(1),
            &mut TrainLog::default(),
        )
        .unwrap();
        assert_eq!(m.drug_ae(), model.drug_ae());
        assert_ne!(m.cell_ae().encoder(), model.cell_ae().encoder());
        assert_eq!(m.head() == model.head(), scope == AdaptScope::CellEncoderOnly);
        assert_eq!(m.phase_history().last(), Some(&PhaseTag::P3FewShot));
    }
}

#[test]
fn zero_shots_equal_zero_shot_evaluation() {
    let (p, model) = aligned(13);
    let spec = FewShotSpec {
        shot_counts: vec![0, 10],
        runs: 2,
        ..FewShotSpec::default()
    };
    let runs = phase3_fewshot(&model, &p.target, &spec, &quick_cfg(3), 1).unwrap();
    let holdout_split = stardr::pipeline::patient_holdout(&p.target, spec.seed_base).unwrap();
    let zero = evaluate(&model, &p.target.subset(&holdout_split.val_indices)).unwrap();
    for r in runs.iter().filter(|r| r.shots == 0) {
        assert_eq!(r.report, zero);
        assert_eq!(r.model, model);
    }
    for r in &runs {
        assert_eq!(r.model.drug_ae(), model.drug_ae());
    }
}

#[test]
fn fewshot_grid_is_independent_of_thread_count() {
    let (p, model) = aligned(14);
    let spec = FewShotSpec {
        shot_counts: vec![0, 5, 10],
        runs: 3,
        ..FewShotSpec::default()
    };
    let a = phase3_fewshot(&model, &p.target, &spec, &quick_cfg(3), 1).unwrap();
    let b = phase3_fewshot(&model, &p.target, &spec, &quick_cfg(3), 4).unwrap();
    let key = |v: &[stardr::pipeline::FewShotRun<f64>]| {
        v.iter()
            .map(|r| (r.run, r.shots, r.report, r.model.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(key(&a), key(&b));
}

#[test]
fn adaptation_requires_supervised_history() {
    let p = small_prepared(0.0, 15);
    let fresh = build_model::<f64>(
        p.train.cell_matrix().n_features(),
        p.train.drug_matrix().n_features(),
        &tiny_arch(),
        0,
    )
    .unwrap();
    let err = phase3_fewshot(&fresh, &p.target, &FewShotSpec::default(), &quick_cfg(1), 1).unwrap_err();
    assert!(matches!(err, Error::PhaseOrder(_)), "{err}");
}

#[test]
fn too_many_shots_is_an_error() {
    let (p, model) = aligned(16);
    let spec = FewShotSpec {
        shot_counts: vec![10, p.target.len()],
        runs: 1,
        ..FewShotSpec::default()
    };
    assert!(matches!(
        phase3_fewshot(&model, &p.target, &spec, &quick_cfg(1), 1),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn shot_draws_are_stratified_when_possible() {
    let (p, _) = aligned(17);
    let pool: Vec<usize> = (0..p.target.len()).collect();
    let (idx, stratified) = stardr::pipeline::draw_shots(&p.target, &pool, 10, &mut StreamRng::new(3)).unwrap();
    assert!(stratified);
    assert_eq!(idx.len(), 10);
    let pos = idx.iter().filter(|&&i| p.target.pair(i).label.is_positive()).count();
    assert!(pos > 0 && pos < 10);
    let only_neg: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&i| !p.target.pair(i).label.is_positive())
        .collect();
    let (idx, stratified) = stardr::pipeline::draw_shots(&p.target, &only_neg, 5, &mut StreamRng::new(3)).unwrap();
    assert!(!stratified);
    assert_eq!(idx.len(), 5);
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = FewShotSpec {
        shot_counts: vec![10, 10],
        ..FewShotSpec::default()
    };
    assert!(bad.validate().is_err());
    let bad = FewShotSpec {
        runs: 0,
        ..FewShotSpec::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn train_log_table_has_one_row_per_epoch() {
    let p = small_prepared(0.0, 18);
    let mut log = TrainLog::default();
    Trainer::new(Method::Staged, tiny_arch(), quick_cfg(2))
        .fit(&p.train, &mut log)
        .unwrap();
    let table = log.to_table();
    assert!(table.starts_with("phase,epoch,loss,wall_time\n"));
    assert_eq!(table.lines().count(), 1 + 2 * 3);
}
