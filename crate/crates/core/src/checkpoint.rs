//! Binary checkpoint format.
//!
//! ```text
//! "STDR"                      magic
//! u32                         format version (1)
//! u8                          provenance (0 staged, 1 single-phase baseline)
//! u32, u8 * n                 phase history
//! u8, [u8; 32]                schema-hash flag and digest (zeros when absent)
//! u64, u64                    rng seed and stream position
//! u32                         number of blocks
//!   u16, utf8                 block name
//!   u32, u32                  rows, cols
//!   f64 * rows * cols         values, row-major
//! [u8; 32]                    SHA-256 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::FeatureSchema;
use crate::error::{Error, Result};
use crate::model::{Autoencoder, PhaseTag, PredictionHead, PredictionModel, Provenance};
use crate::nn::{Activation, DenseLayer, Matrix, Sequential};
use crate::preprocess::MinMaxScaler;
pub use crate::preprocess::Scalers;
use crate::rng::RngState;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"STDR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: PredictionModel<T>,
    pub scalers: Option<Scalers<T>>,
}

struct Block {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

fn push_block<T: Scalar>(out: &mut Vec<u8>, name: &str, rows: usize, cols: usize, values: &[T]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_f64_exact().to_le_bytes());
    }
}

fn push_network<T: Scalar>(out: &mut Vec<u8>, count: &mut u32, prefix: &str, net: &Sequential<T>) {
    for (i, l) in net.layers().iter().enumerate() {
        push_block(
            out,
            &format!("{prefix}.{i}.weight"),
            l.out_dim(),
            l.in_dim(),
            l.weights().as_slice(),
        );
        push_block(out, &format!("{prefix}.{i}.bias"), 1, l.out_dim(), l.bias());
        *count += 2;
    }
}

fn push_scaler<T: Scalar>(out: &mut Vec<u8>, count: &mut u32, prefix: &str, s: &MinMaxScaler<T>) {
    push_block(out, &format!("{prefix}.min"), 1, s.n_features(), &s.feature_min);
    push_block(out, &format!("{prefix}.max"), 1, s.n_features(), &s.feature_max);
    push_block(
        out,
        &format!("{prefix}.fitted_on"),
        1,
        1,
        &[T::from_usize(s.fitted_on).unwrap()],
    );
    *count += 3;
}

/// Serializes a checkpoint to bytes.
pub fn encode_checkpoint<T: Scalar>(ckpt: &Checkpoint<T>) -> Vec<u8> {
    let m = &ckpt.model;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(match m.provenance() {
        Provenance::Staged => 0,
        Provenance::SinglePhaseBaseline => 1,
    });
    out.extend_from_slice(&(m.phase_history().len() as u32).to_le_bytes());
    out.extend(m.phase_history().iter().map(|p| p.code()));
    match m.schema_hash() {
        Some(h) => {
            out.push(1);
            out.extend_from_slice(&h);
        }
        None => {
            out.push(0);
            out.extend_from_slice(&[0u8; 32]);
        }
    }
    out.extend_from_slice(&m.rng_state().seed.to_le_bytes());
    out.extend_from_slice(&m.rng_state().position.to_le_bytes());

    let mut blocks = Vec::new();
    let mut count = 0u32;
    push_network(&mut blocks, &mut count, "cell_ae.encoder", m.cell_ae().encoder());
    push_network(&mut blocks, &mut count, "cell_ae.decoder", m.cell_ae().decoder());
    push_network(&mut blocks, &mut count, "drug_ae.encoder", m.drug_ae().encoder());
    push_network(&mut blocks, &mut count, "drug_ae.decoder", m.drug_ae().decoder());
    push_network(&mut blocks, &mut count, "head", &m.head().net);
    if let Some(s) = &ckpt.scalers {
        push_scaler(&mut blocks, &mut count, "scaler.cell", &s.cell);
        push_scaler(&mut blocks, &mut count, "scaler.drug", &s.drug);
    }
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&blocks);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn layer_from<T: Scalar>(
    blocks: &BTreeMap<String, Block>,
    prefix: &str,
    i: usize,
    act: Activation,
) -> Result<DenseLayer<T>> {
    let missing = |n: &str| Error::Checkpoint(format!("missing block `{n}`"));
    let wn = format!("{prefix}.{i}.weight");
    let bn = format!("{prefix}.{i}.bias");
    let w = blocks.get(&wn).ok_or_else(|| missing(&wn))?;
    let b = blocks.get(&bn).ok_or_else(|| missing(&bn))?;
    if b.rows != 1 || b.cols != w.rows {
        return Err(Error::Checkpoint(format!("bias `{bn}` does not match `{wn}`")));
    }
    let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    DenseLayer::new(Matrix::from_vec(w.rows, w.cols, conv(&w.values))?, conv(&b.values), act)
}

fn layer_count(blocks: &BTreeMap<String, Block>, prefix: &str) -> usize {
    (0..)
        .take_while(|i| blocks.contains_key(&format!("{prefix}.{i}.weight")))
        .count()
}

fn network_from<T: Scalar>(
    blocks: &BTreeMap<String, Block>,
    prefix: &str,
    activation: impl Fn(usize, usize) -> Activation,
) -> Result<Sequential<T>> {
    let n = layer_count(blocks, prefix);
    if n == 0 {
        return Err(Error::Checkpoint(format!("no layers under `{prefix}`")));
    }
    let layers = (0..n)
        .map(|i| layer_from(blocks, prefix, i, activation(i, n)))
        .collect::<Result<Vec<_>>>()?;
    Sequential::new(layers).map_err(|e| Error::Checkpoint(format!("`{prefix}`: {e}")))
}

fn autoencoder_from<T: Scalar>(blocks: &BTreeMap<String, Block>, name: &str) -> Result<Autoencoder<T>> {
    let enc = network_from(blocks, &format!("{name}.encoder"), |_, _| Activation::Relu)?;
    let dec = network_from(blocks, &format!("{name}.decoder"), |i, n| {
        if i + 1 == n {
            Activation::Identity
        } else {
            Activation::Relu
        }
    })?;
    Autoencoder::from_parts(enc, dec).map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))
}

fn scaler_from<T: Scalar>(blocks: &BTreeMap<String, Block>, prefix: &str) -> Result<Option<MinMaxScaler<T>>> {
    let (Some(lo), Some(hi), Some(n)) = (
        blocks.get(&format!("{prefix}.min")),
        blocks.get(&format!("{prefix}.max")),
        blocks.get(&format!("{prefix}.fitted_on")),
    ) else {
        return Ok(None);
    };
    if lo.cols != hi.cols {
        return Err(Error::Checkpoint(format!("`{prefix}` min/max lengths differ")));
    }
    Ok(Some(MinMaxScaler {
        feature_min: lo.values.iter().map(|&v| T::lit(v)).collect(),
        feature_max: hi.values.iter().map(|&v| T::lit(v)).collect(),
        fitted_on: n.values[0] as usize,
    }))
}

/// Parses checkpoint bytes; verifies magic, version, digest and dimensions.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic: not a checkpoint file".into()));
    }
    let mut c = Cursor { bytes, pos: 4 };
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    if bytes.len() < 32 + 8 {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint(
            "content digest mismatch: file is truncated or corrupted".into(),
        ));
    }
    let mut c = Cursor {
        bytes: body,
        pos: c.pos,
    };
    let provenance = match c.u8()? {
        0 => Provenance::Staged,
        1 => Provenance::SinglePhaseBaseline,
        p => return Err(Error::Checkpoint(format!("unknown provenance code {p}"))),
    };
    let n_phases = c.u32()? as usize;
    let history = c
        .take(n_phases)?
        .iter()
        .map(|&p| PhaseTag::from_code(p).ok_or_else(|| Error::Checkpoint(format!("unknown phase code {p}"))))
        .collect::<Result<Vec<_>>>()?;
    let has_hash = c.u8()? == 1;
    let hash: [u8; 32] = c.take(32)?.try_into().unwrap();
    let rng_state = RngState {
        seed: c.u64()?,
        position: c.u64()?,
    };
    let n_blocks = c.u32()?;
    let mut blocks = BTreeMap::new();
    for _ in 0..n_blocks {
        let len = c.u16()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?;
        let rows = c.u32()? as usize;
        let cols = c.u32()? as usize;
        let values = (0..rows * cols).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        blocks.insert(name, Block { rows, cols, values });
    }
    if c.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after last block".into()));
    }

    let cell_ae = autoencoder_from(&blocks, "cell_ae")?;
    let drug_ae = autoencoder_from(&blocks, "drug_ae")?;
    if layer_count(&blocks, "head") != 2 {
        return Err(Error::Checkpoint("head must have exactly two layers".into()));
    }
    let head = PredictionHead::from_layers(
        layer_from(&blocks, "head", 0, Activation::Relu)?,
        layer_from(&blocks, "head", 1, Activation::Sigmoid)?,
    )?;
    let mut model = PredictionModel::from_parts(cell_ae, drug_ae, head, provenance)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    model.set_history(history);
    if has_hash {
        model.set_schema_hash(hash);
    }
    model.rng_state = rng_state;
    let scalers = match (
        scaler_from(&blocks, "scaler.cell")?,
        scaler_from(&blocks, "scaler.drug")?,
    ) {
        (Some(cell), Some(drug)) => Some(Scalers { cell, drug }),
        (None, None) => None,
        _ => return Err(Error::Checkpoint("only one scaler present".into())),
    };
    Ok(Checkpoint { model, scalers })
}

pub fn save_checkpoint<T: Scalar>(ckpt: &Checkpoint<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(ckpt))?;
    Ok(())
}

/// Loads a checkpoint. With a schema, the stored schema digest and the
/// model's input widths must both agree with it.
pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>, schema: Option<&FeatureSchema>) -> Result<Checkpoint<T>> {
    let ckpt = decode_checkpoint::<T>(&fs::read(path)?)?;
    if let Some(schema) = schema {
        check_schema(&ckpt.model, schema)?;
    }
    Ok(ckpt)
}

/// Checks that a model was trained against `schema`.
pub fn check_schema<T: Scalar>(model: &PredictionModel<T>, schema: &FeatureSchema) -> Result<()> {
    let expected = schema.digest();
    if let Some(found) = model.schema_hash() {
        if found != expected {
            return Err(Error::SchemaMismatch {
                expected: hex::encode(expected),
                found: hex::encode(found),
            });
        }
    }
    let dims = (model.cell_ae().input_dim(), model.drug_ae().input_dim());
    let want = (schema.cell_features.len(), schema.drug_features.len());
    if dims != want {
        return Err(Error::SchemaMismatch {
            expected: format!("input widths {want:?}"),
            found: format!("{dims:?}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelConfig};

    fn cfg() -> ModelConfig {
        ModelConfig {
            cell_latent: 5,
            drug_latent: 3,
            head_hidden: 4,
            encoder_hidden: vec![],
        }
    }

    fn ckpt() -> Checkpoint<f64> {
        let mut model = build_model(8, 6, &cfg(), 11).unwrap();
        model.push_phase(PhaseTag::P1Pretrain);
        model.push_phase(PhaseTag::P2Align);
        Checkpoint { model, scalers: None }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let c = ckpt();
        let bytes = encode_checkpoint(&c);
        let back = decode_checkpoint::<f64>(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(encode_checkpoint(&back), bytes);
        let x = Matrix::filled(2, 8, 0.25);
        let d = Matrix::filled(2, 6, 0.75);
        let p0 = c.model.predict(&x, &d).unwrap();
        let p1 = back.model.predict(&x, &d).unwrap();
        assert_eq!(
            p0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            p1.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn f32_models_roundtrip() {
        let model: PredictionModel<f32> = build_model(8, 6, &cfg(), 2).unwrap();
        let c = Checkpoint { model, scalers: None };
        assert_eq!(decode_checkpoint::<f32>(&encode_checkpoint(&c)).unwrap(), c);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_checkpoint(&ckpt());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint::<f64>(&bad)
            .unwrap_err()
            .to_string()
            .contains("magic"));
        let mut flipped = bytes.clone();
        flipped[100] ^= 1;
        assert!(decode_checkpoint::<f64>(&flipped).is_err());
        assert!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 7]).is_err());
        let mut ver = bytes.clone();
        ver[4] = 9;
        assert!(decode_checkpoint::<f64>(&ver)
            .unwrap_err()
            .to_string()
            .contains("version"));
    }

    #[test]
    fn schema_mismatch_rejected() {
        let ids = |n: usize, p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let s8 = FeatureSchema::new("S", ids(8, "expr:"), ids(6, "fp:")).unwrap();
        let s7 = FeatureSchema::new("S", ids(7, "expr:"), ids(6, "fp:")).unwrap();
        let mut c = ckpt();
        assert!(check_schema(&c.model, &s8).is_ok());
        assert!(check_schema(&c.model, &s7).is_err());
        c.model.set_schema_hash(s8.digest());
        let other = FeatureSchema::new("T", ids(8, "expr:"), ids(6, "fp:")).unwrap();
        assert!(matches!(
            check_schema(&c.model, &other),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn scalers_roundtrip() {
        let mut c = ckpt();
        let s = MinMaxScaler {
            feature_min: vec![0.0; 8],
            feature_max: vec![2.5; 8],
            fitted_on: 17,
        };
        let d = MinMaxScaler {
            feature_min: vec![-1.0; 6],
            feature_max: vec![1.0; 6],
            fitted_on: 4,
        };
        c.scalers = Some(Scalers { cell: s, drug: d });
        assert_eq!(decode_checkpoint::<f64>(&encode_checkpoint(&c)).unwrap(), c);
    }
}
