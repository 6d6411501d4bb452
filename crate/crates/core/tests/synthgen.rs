mod common;

use std::collections::HashMap;

use common::small_shift;
use stardr::eval::roc_auc;
use stardr::latent::{mahalanobis_centroid_distance, pca_fit};
use stardr::nn::Matrix;
use stardr::synthgen::{generate, write_synth, Domain, ShiftConfig, SYNTH_FILES};

fn maha(delta: f64) -> f64 {
    let cfg = ShiftConfig {
        shift_delta: delta,
        ..ShiftConfig::default()
    };
    let d = generate::<f64>(&cfg).unwrap();
    let (a, b) = (d.source.cell_matrix().values(), d.target.cell_matrix().values());
    let both = Matrix::from_rows(&[a.to_rows(), b.to_rows()].concat()).unwrap();
    let p = pca_fit(&both, 2).unwrap();
    mahalanobis_centroid_distance(&p.project_2d(a).unwrap(), &p.project_2d(b).unwrap()).unwrap()
}

#[test]
fn default_sizes() {
    let d = generate::<f64>(&ShiftConfig::default()).unwrap();
    assert_eq!(d.source.cell_matrix().n_entities(), 400);
    assert_eq!(d.target.cell_matrix().n_entities(), 200);
    assert_eq!(d.source.drug_matrix().n_entities(), 30);
    assert_eq!(d.source.cell_matrix().n_features(), 500);
    assert_eq!(d.source.drug_matrix().n_features(), 100);
}

#[test]
fn no_shift_gives_matching_distributions() {
    let cfg = ShiftConfig {
        n_cells_source: 1000,
        n_cells_target: 1000,
        ..small_shift(0.0, 3)
    };
    let d = generate::<f64>(&cfg).unwrap();
    let (a, b) = (d.source.cell_matrix().values(), d.target.cell_matrix().values());
    let (ma, mb) = (a.column_means(), b.column_means());
    // Feature variance is 1 + sigma^2, so the s.e. of a mean difference is ~0.045.
    for j in 0..a.cols() {
        assert!((ma[j] - mb[j]).abs() < 5.0 * 0.046, "feature {j}");
    }
    let rate = |ds: &stardr::PairDataset<f64>| ds.class_counts().1 as f64 / ds.len() as f64;
    assert!((rate(&d.source) - rate(&d.target)).abs() < 0.05);
}

#[test]
fn oracle_reproduces_labels_without_noise() {
    let cfg = ShiftConfig {
        noise_sigma: 0.0,
        ..small_shift(2.0, 4)
    };
    let d = generate::<f64>(&cfg).unwrap();
    for (domain, ds) in [(Domain::Source, &d.source), (Domain::Target, &d.target)] {
        let scores = d.oracle.scores(domain, ds);
        let correct = scores
            .iter()
            .zip(ds.pairs())
            .filter(|(s, p)| (**s > 0.0) == p.label.is_positive())
            .count();
        assert_eq!(correct, ds.len());
    }
}

#[test]
fn strong_shift_separates_domains() {
    assert!(maha(6.0) > 5.0);
}

#[test]
fn centroid_distance_grows_with_shift() {
    let d: Vec<f64> = [0.0, 1.0, 2.0, 4.0, 6.0].iter().map(|&x| maha(x)).collect();
    assert!(d.windows(2).all(|w| w[1] >= w[0]), "{d:?}");
}

#[test]
fn drug_effects_dominate() {
    let d = generate::<f64>(&ShiftConfig::default()).unwrap();
    let split = stardr::preprocess::stratified_split(&d.source, 0.2, 1).unwrap();
    let train = d.source.subset(&split.train_indices);
    let val = d.source.subset(&split.val_indices);
    let mean_label = |key: &dyn Fn(&stardr::ResponsePair) -> String| {
        let mut acc: HashMap<String, (f64, f64)> = HashMap::new();
        for p in train.pairs() {
            let e = acc.entry(key(p)).or_default();
            e.0 += p.label.as_u8() as f64;
            e.1 += 1.0;
        }
        let labels: Vec<bool> = val.pairs().iter().map(|p| p.label.is_positive()).collect();
        let scores: Vec<f64> = val
            .pairs()
            .iter()
            .map(|p| acc.get(&key(p)).map_or(0.5, |(s, n)| s / n))
            .collect();
        roc_auc(&scores, &labels).unwrap()
    };
    let by_drug = mean_label(&|p| p.drug_id.clone());
    let by_cell = mean_label(&|p| p.cell_id.clone());
    assert!(by_drug > by_cell, "drug {by_drug} cell {by_cell}");
}

#[test]
fn shift_knobs_move_labels() {
    let base = generate::<f64>(&small_shift(0.0, 5)).unwrap();
    let up = generate::<f64>(&ShiftConfig {
        label_shift: 0.8,
        ..small_shift(0.0, 5)
    })
    .unwrap();
    assert_eq!(base.source.pairs(), up.source.pairs());
    assert!(up.target.class_counts().1 > base.target.class_counts().1);
    let rotated = generate::<f64>(&ShiftConfig {
        concept_shift: 1.0,
        ..small_shift(0.0, 5)
    })
    .unwrap();
    let wn = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((wn(&rotated.oracle.w_target) - wn(&rotated.oracle.w_source)).abs() < 1e-9);
    assert_ne!(rotated.target.pairs(), base.target.pairs());
}

#[test]
fn emitted_files_are_reproducible_and_reload() {
    let cfg = small_shift(3.0, 6);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_synth(&generate::<f64>(&cfg).unwrap(), a.path()).unwrap();
    write_synth(&generate::<f64>(&cfg).unwrap(), b.path()).unwrap();
    for f in SYNTH_FILES {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let orig = generate::<f64>(&cfg).unwrap();
    let cells = std::sync::Arc::new(
        stardr::data::load_feature_matrix::<f64>(a.path().join(SYNTH_FILES[1]), stardr::ModalityKind::Cell).unwrap(),
    );
    let drugs = std::sync::Arc::new(
        stardr::data::load_feature_matrix::<f64>(a.path().join(SYNTH_FILES[2]), stardr::ModalityKind::Drug).unwrap(),
    );
    assert_eq!(*cells, **orig.target.cell_matrix());
    let pairs = stardr::data::load_response_pairs(
        a.path().join(SYNTH_FILES[4]),
        cells,
        drugs,
        stardr::data::DatasetTag::Synthetic,
    )
    .unwrap();
    assert_eq!(pairs.dropped, 0);
    assert_eq!(pairs.dataset.pairs(), orig.target.pairs());
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        ShiftConfig {
            n_drugs: 0,
            ..ShiftConfig::default()
        },
        ShiftConfig {
            shift_delta: -1.0,
            ..ShiftConfig::default()
        },
        ShiftConfig {
            label_shift: 1.5,
            ..ShiftConfig::default()
        },
        ShiftConfig {
            pair_fraction: 0.0,
            ..ShiftConfig::default()
        },
    ] {
        assert!(generate::<f64>(&bad).is_err());
    }
}
