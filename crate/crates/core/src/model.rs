//! Cell and drug autoencoders, the prediction head and the composed model.

use std::fmt;

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Matrix, Sequential, PROB_EPS};
use crate::rng::{RngState, StreamRng};
use crate::scalar::Scalar;

/// Architecture knobs. Defaults: cell latent 700, drug latent 50, head 128.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub cell_latent: usize,
    pub drug_latent: usize,
    pub head_hidden: usize,
    /// Hidden widths between input and latent; the decoder mirrors them.
    /// Empty means single affine encoder and decoder layers.
    pub encoder_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cell_latent: 700,
            drug_latent: 50,
            head_hidden: 128,
            encoder_hidden: Vec::new(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell_latent == 0 || self.drug_latent == 0 || self.head_hidden == 0 {
            return Err(Error::Config("latent and head widths must be at least 1".into()));
        }
        if self.encoder_hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Non-fatal remarks about a configuration for the given input widths.
    pub fn warnings(&self, cell_dim: usize, drug_dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.cell_latent > cell_dim {
            out.push(format!(
                "cell latent width {} exceeds cell input width {cell_dim}",
                self.cell_latent
            ));
        }
        if self.drug_latent > drug_dim {
            out.push(format!(
                "drug latent width {} exceeds drug input width {drug_dim}",
                self.drug_latent
            ));
        }
        out
    }
}

/// Encoder (ReLU layers) and decoder (ReLU hidden layers, linear output).
#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder<T> {
    pub(crate) encoder: Sequential<T>,
    pub(crate) decoder: Sequential<T>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn init(input_dim: usize, latent_dim: usize, hidden: &[usize], rng: &mut StreamRng) -> Result<Self> {
        if input_dim == 0 || latent_dim == 0 {
            return Err(Error::Config("autoencoder widths must be at least 1".into()));
        }
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(latent_dim);
        let encoder = widths
            .windows(2)
            .map(|w| DenseLayer::init(w[0], w[1], Activation::Relu, rng))
            .collect();
        let back: Vec<usize> = widths.iter().rev().copied().collect();
        let n = back.len() - 1;
        let decoder = back
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::init(w[0], w[1], act, rng)
            })
            .collect();
        Self::from_parts(Sequential::new(encoder)?, Sequential::new(decoder)?)
    }

    /// Assembles an autoencoder, checking the dimension chain.
    pub fn from_parts(encoder: Sequential<T>, decoder: Sequential<T>) -> Result<Self> {
        if encoder.out_dim() != decoder.in_dim() {
            return Err(Error::shape(
                "autoencoder latent",
                format!("decoder input {}", encoder.out_dim()),
                format!("{}", decoder.in_dim()),
            ));
        }
        if decoder.out_dim() != encoder.in_dim() {
            return Err(Error::shape(
                "autoencoder reconstruction",
                format!("decoder output {}", encoder.in_dim()),
                format!("{}", decoder.out_dim()),
            ));
        }
        Ok(Autoencoder { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn encoder(&self) -> &Sequential<T> {
        &self.encoder
    }

    pub fn decoder(&self) -> &Sequential<T> {
        &self.decoder
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn encode(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.encoder.infer(x)
    }

    pub fn reconstruct(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.decoder.infer(&self.encoder.infer(x)?)
    }
}

/// Hidden ReLU layer followed by a sigmoid output over `[cell latent; drug latent]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionHead<T> {
    pub(crate) net: Sequential<T>,
}

impl<T: Scalar> PredictionHead<T> {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut StreamRng) -> Result<Self> {
        Ok(PredictionHead {
            net: Sequential::new(vec![
                DenseLayer::init(input_dim, hidden, Activation::Relu, rng),
                DenseLayer::init(hidden, 1, Activation::Sigmoid, rng),
            ])?,
        })
    }

    pub fn from_layers(hidden: DenseLayer<T>, output: DenseLayer<T>) -> Result<Self> {
        if hidden.activation() != Activation::Relu
            || output.activation() != Activation::Sigmoid
            || output.out_dim() != 1
        {
            return Err(Error::InvalidInput(
                "head must be a ReLU hidden layer and a single sigmoid output".into(),
            ));
        }
        Ok(PredictionHead {
            net: Sequential::new(vec![hidden, output])?,
        })
    }

    pub fn hidden(&self) -> &DenseLayer<T> {
        &self.net.layers()[0]
    }

    pub fn output(&self) -> &DenseLayer<T> {
        &self.net.layers()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Staged,
    SinglePhaseBaseline,
}

/// Training phases, recorded in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseTag {
    P1Pretrain,
    P2Align,
    P3FewShot,
    BaselineSinglePhase,
}

impl PhaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseTag::P1Pretrain => "P1_Pretrain",
            PhaseTag::P2Align => "P2_Align",
            PhaseTag::P3FewShot => "P3_FewShot",
            PhaseTag::BaselineSinglePhase => "BaselineSinglePhase",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            PhaseTag::P1Pretrain => 1,
            PhaseTag::P2Align => 2,
            PhaseTag::P3FewShot => 3,
            PhaseTag::BaselineSinglePhase => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => PhaseTag::P1Pretrain,
            2 => PhaseTag::P2Align,
            3 => PhaseTag::P3FewShot,
            4 => PhaseTag::BaselineSinglePhase,
            _ => return None,
        })
    }
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cell autoencoder, drug autoencoder and head, plus training provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionModel<T> {
    pub(crate) cell_ae: Autoencoder<T>,
    pub(crate) drug_ae: Autoencoder<T>,
    pub(crate) head: PredictionHead<T>,
    provenance: Provenance,
    phase_history: Vec<PhaseTag>,
    pub(crate) schema_hash: Option<[u8; 32]>,
    pub(crate) rng_state: RngState,
}

pub(crate) fn init_stream(seed: u64, component: &str) -> StreamRng {
    StreamRng::derived(seed, &format!("init/{component}"), &[])
}

impl<T: Scalar> PredictionModel<T> {
    /// Assembles a model after checking the dimension chain.
    pub fn from_parts(
        cell_ae: Autoencoder<T>,
        drug_ae: Autoencoder<T>,
        head: PredictionHead<T>,
        provenance: Provenance,
    ) -> Result<Self> {
        let expected = cell_ae.latent_dim() + drug_ae.latent_dim();
        if head.input_dim() != expected {
            return Err(Error::shape(
                "prediction head input",
                format!("{expected} (cell latent + drug latent)"),
                format!("{}", head.input_dim()),
            ));
        }
        Ok(PredictionModel {
            cell_ae,
            drug_ae,
            head,
            provenance,
            phase_history: Vec::new(),
            schema_hash: None,
            rng_state: RngState::default(),
        })
    }

    pub fn cell_ae(&self) -> &Autoencoder<T> {
        &self.cell_ae
    }

    pub fn drug_ae(&self) -> &Autoencoder<T> {
        &self.drug_ae
    }

    pub fn head(&self) -> &PredictionHead<T> {
        &self.head
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn phase_history(&self) -> &[PhaseTag] {
        &self.phase_history
    }

    pub(crate) fn push_phase(&mut self, tag: PhaseTag) {
        self.phase_history.push(tag);
    }

    pub(crate) fn set_history(&mut self, history: Vec<PhaseTag>) {
        self.phase_history = history;
    }

    pub fn schema_hash(&self) -> Option<[u8; 32]> {
        self.schema_hash
    }

    pub fn set_schema_hash(&mut self, hash: [u8; 32]) {
        self.schema_hash = Some(hash);
    }

    pub fn rng_state(&self) -> RngState {
        self.rng_state
    }

    pub fn param_count(&self) -> usize {
        self.cell_ae.param_count() + self.drug_ae.param_count() + self.head.param_count()
    }

    /// Head input: cell latent columns first, then drug latent columns.
    pub fn joint_latent(&self, cell_x: &Matrix<T>, drug_x: &Matrix<T>) -> Result<Matrix<T>> {
        if cell_x.rows() != drug_x.rows() {
            return Err(Error::shape(
                "predict batch",
                format!("{} drug rows", cell_x.rows()),
                format!("{} drug rows", drug_x.rows()),
            ));
        }
        Matrix::hconcat(&self.cell_ae.encode(cell_x)?, &self.drug_ae.encode(drug_x)?)
    }

    /// Sensitivity probabilities, clamped to `[1e-12, 1 - 1e-12]`.
    pub fn predict(&self, cell_x: &Matrix<T>, drug_x: &Matrix<T>) -> Result<Vec<T>> {
        let z = self.joint_latent(cell_x, drug_x)?;
        let eps = T::lit(PROB_EPS);
        Ok(self
            .head
            .net
            .infer(&z)?
            .into_vec()
            .into_iter()
            .map(|p| p.max(eps).min(T::one() - eps))
            .collect())
    }
}

/// Freshly initialized model. Each component draws from its own stream, so
/// the staged and baseline routes start from identical parameters.
pub fn build_model<T: Scalar>(
    cell_input_dim: usize,
    drug_input_dim: usize,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<PredictionModel<T>> {
    cfg.validate()?;
    let cell_ae = Autoencoder::init(
        cell_input_dim,
        cfg.cell_latent,
        &cfg.encoder_hidden,
        &mut init_stream(seed, "cell_ae"),
    )?;
    let drug_ae = Autoencoder::init(
        drug_input_dim,
        cfg.drug_latent,
        &cfg.encoder_hidden,
        &mut init_stream(seed, "drug_ae"),
    )?;
    let head = PredictionHead::init(
        cfg.cell_latent + cfg.drug_latent,
        cfg.head_hidden,
        &mut init_stream(seed, "head"),
    )?;
    PredictionModel::from_parts(cell_ae, drug_ae, head, Provenance::Staged)
}

pub(crate) fn with_provenance<T: Scalar>(mut m: PredictionModel<T>, p: Provenance) -> PredictionModel<T> {
    m.provenance = p;
    m
}
