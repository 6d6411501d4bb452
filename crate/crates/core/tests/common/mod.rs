#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use stardr::data::{DatasetTag, FeatureMatrix, Label, ModalityKind, PairDataset, ResponsePair};
use stardr::experiment::{prepare, Prepared};
use stardr::model::ModelConfig;
use stardr::nn::{Matrix, TrainConfig};
use stardr::rng::StreamRng;
use stardr::synthgen::{generate, ShiftConfig, SynthData};

pub fn small_shift(delta: f64, seed: u64) -> ShiftConfig {
    ShiftConfig {
        n_cells_source: 80,
        n_cells_target: 60,
        n_drugs: 8,
        latent_dim_true: 4,
        feature_dim_cell: 40,
        feature_dim_drug: 12,
        shift_delta: delta,
        pair_fraction: 0.5,
        seed,
        ..ShiftConfig::default()
    }
}

pub fn small_data(delta: f64, seed: u64) -> SynthData<f64> {
    generate(&small_shift(delta, seed)).unwrap()
}

pub fn small_prepared(delta: f64, seed: u64) -> Prepared<f64> {
    let d = small_data(delta, seed);
    prepare(&d.source, &d.target, 0.1, seed).unwrap()
}

pub fn tiny_arch() -> ModelConfig {
    ModelConfig {
        cell_latent: 8,
        drug_latent: 4,
        head_hidden: 8,
        encoder_hidden: Vec::new(),
    }
}

pub fn quick_cfg(epochs: usize) -> TrainConfig {
    TrainConfig::default().with_epochs(epochs)
}

/// Enough pairs for a few hundred optimizer steps in 25 epochs.
pub fn medium_data(seed: u64) -> SynthData<f64> {
    generate(&ShiftConfig {
        n_cells_source: 200,
        n_drugs: 20,
        ..small_shift(0.0, seed)
    })
    .unwrap()
}

/// Pairs labeled by the sign of `cell[0] + 2 drug[0]`, keeping only pairs
/// at least 0.5 from the boundary.
pub fn separable_pairs(n_cells: usize, n_drugs: usize, seed: u64) -> PairDataset<f64> {
    let mut rng = StreamRng::new(seed);
    let mut matrix = |n: usize, d: usize, prefix: &str, kind| {
        let v: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMatrix::new(
            (0..n).map(|i| format!("{prefix}{i}")).collect(),
            (0..d).map(|j| format!("f{j}")).collect(),
            Matrix::from_vec(n, d, v).unwrap(),
            kind,
        )
        .unwrap()
    };
    let cells = matrix(n_cells, 10, "c", ModalityKind::Cell);
    let drugs = matrix(n_drugs, 5, "d", ModalityKind::Drug);
    let mut pairs = Vec::new();
    for c in 0..n_cells {
        for d in 0..n_drugs {
            let s = cells.values().get(c, 0) + 2.0 * drugs.values().get(d, 0);
            if s.abs() > 0.5 {
                pairs.push(ResponsePair::new(
                    format!("c{c}"),
                    format!("d{d}"),
                    Label::from_bool(s > 0.0),
                ));
            }
        }
    }
    PairDataset::new(pairs, Arc::new(cells), Arc::new(drugs), DatasetTag::Synthetic).unwrap()
}
