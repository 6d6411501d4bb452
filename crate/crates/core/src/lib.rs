//! Staged transfer learning for drug-response prediction.
//!
//! Cell and drug autoencoders are pretrained on unlabeled features, aligned
//! with a prediction head on labeled cell-line pairs, then adapted to a
//! shifted target domain from a few labeled pairs. A single-phase baseline
//! with the same architecture is trained for comparison. Numerical code is
//! generic over [`Scalar`] (`f32` or `f64`); the aliases below pin one.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod latent;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod synthgen;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use data::{FeatureMatrix, FeatureSchema, Label, ModalityKind, PairDataset, ResponsePair};
pub use error::{Error, Result};
pub use eval::{MetricReport, Protocol, SplitPlan};
pub use model::{build_model, ModelConfig, PhaseTag, PredictionModel, Provenance};
pub use nn::{Matrix, TrainConfig};
pub use pipeline::{AdaptScope, FewShotSpec, Method, TrainLog, Trainer};
pub use preprocess::{MinMaxScaler, Scalers};
pub use rng::{derive_seed, StreamRng};
pub use scalar::Scalar;
pub use synthgen::ShiftConfig;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type FeatureMatrix64 = FeatureMatrix<f64>;
pub type FeatureMatrix32 = FeatureMatrix<f32>;
pub type PairDataset64 = PairDataset<f64>;
pub type PairDataset32 = PairDataset<f32>;
pub type PredictionModel64 = PredictionModel<f64>;
pub type PredictionModel32 = PredictionModel<f32>;
pub type Checkpoint64 = Checkpoint<f64>;
pub type Checkpoint32 = Checkpoint<f32>;
