//! Feature matrices, feature schemas and labeled cell–drug pairs, with the
//! delimited-text ingestion formats used for real exports and synthetic data.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Feature-id prefixes whose columns must hold only 0/1.
pub const BINARY_PREFIXES: [&str; 2] = ["mut:", "fp:"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModalityKind {
    Cell,
    Drug,
}

impl fmt::Display for ModalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModalityKind::Cell => "cell",
            ModalityKind::Drug => "drug",
        })
    }
}

/// Entity-by-feature matrix with ordered identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    entity_ids: Vec<String>,
    feature_ids: Vec<String>,
    values: Matrix<T>,
    kind: ModalityKind,
    index: HashMap<String, usize>,
}

fn unique_index(ids: &[String], kind: &'static str) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateId { kind, id: id.clone() });
        }
    }
    Ok(index)
}

fn is_binary_feature(id: &str) -> bool {
    BINARY_PREFIXES.iter().any(|p| id.starts_with(p))
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(
        entity_ids: Vec<String>,
        feature_ids: Vec<String>,
        values: Matrix<T>,
        kind: ModalityKind,
    ) -> Result<Self> {
        if values.shape() != (entity_ids.len(), feature_ids.len()) {
            return Err(Error::shape(
                "FeatureMatrix",
                format!("{}x{}", entity_ids.len(), feature_ids.len()),
                format!("{}x{}", values.rows(), values.cols()),
            ));
        }
        let index = unique_index(&entity_ids, "entity")?;
        unique_index(&feature_ids, "feature")?;
        if !values.all_finite() {
            return Err(Error::InvalidInput("feature matrix has non-finite values".into()));
        }
        for (j, id) in feature_ids.iter().enumerate() {
            if is_binary_feature(id)
                && (0..values.rows()).any(|r| {
                    let v = values.get(r, j);
                    v != T::zero() && v != T::one()
                })
            {
                return Err(Error::InvalidInput(format!(
                    "binary feature `{id}` holds a value outside {{0, 1}}"
                )));
            }
        }
        Ok(FeatureMatrix {
            entity_ids,
            feature_ids,
            values,
            kind,
            index,
        })
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn kind(&self) -> ModalityKind {
        self.kind
    }

    pub fn n_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Same identifiers, new values (e.g. after scaling).
    pub fn with_values(&self, values: Matrix<T>) -> Result<Self> {
        Self::new(self.entity_ids.clone(), self.feature_ids.clone(), values, self.kind)
    }

    /// Keeps the given entity rows, in order.
    pub fn select_entities(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            rows.iter().map(|&r| self.entity_ids[r].clone()).collect(),
            self.feature_ids.clone(),
            self.values.select_rows(rows),
            self.kind,
        )
    }

    /// Stacks entities of `other` (same feature ids) below `self`.
    pub fn vstack(&self, other: &FeatureMatrix<T>) -> Result<Self> {
        if self.feature_ids != other.feature_ids {
            return Err(Error::InvalidInput(
                "cannot stack matrices with different feature ids".into(),
            ));
        }
        let mut ids = self.entity_ids.clone();
        ids.extend(other.entity_ids.iter().cloned());
        let mut data = self.values.as_slice().to_vec();
        data.extend_from_slice(other.values.as_slice());
        let values = Matrix::from_vec(ids.len(), self.n_features(), data)?;
        Self::new(ids, self.feature_ids.clone(), values, self.kind)
    }
}

fn detect_delimiter(path: &Path) -> Result<u8> {
    let text = fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("");
    Ok(if header.contains('\t') { b'\t' } else { b',' })
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let delimiter = detect_delimiter(path)?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_path(path)?)
}

fn csv_parse_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("ragged row: expected {expected_len} fields, found {len}")
        }
        _ => err.to_string(),
    };
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

/// Reads a delimited feature matrix: header of feature ids (first header
/// cell names the id column), one entity per row. Empty cells become 0.
pub fn load_feature_matrix<T: Scalar>(path: impl AsRef<Path>, kind: ModalityKind) -> Result<FeatureMatrix<T>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_parse_error(path, e))?.clone();
    let feature_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if feature_ids.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "header lists no feature columns".into(),
        });
    }
    let mut entity_ids = Vec::new();
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_parse_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        entity_ids.push(record[0].trim().to_string());
        for (j, cell) in record.iter().skip(1).enumerate() {
            let cell = cell.trim();
            let v = if cell.is_empty() {
                T::zero()
            } else {
                let v: T = cell.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("non-numeric value `{cell}` in column `{}`", feature_ids[j]),
                })?;
                if v.is_nan() {
                    T::zero()
                } else {
                    v
                }
            };
            data.push(v);
        }
    }
    let values = Matrix::from_vec(entity_ids.len(), feature_ids.len(), data)?;
    FeatureMatrix::new(entity_ids, feature_ids, values, kind)
}

/// Writes a comma-delimited matrix readable by [`load_feature_matrix`].
/// Values use shortest round-trip formatting, so reloading is exact.
pub fn write_feature_matrix<T: Scalar>(m: &FeatureMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["entity_id".to_string()];
    header.extend(m.feature_ids.iter().cloned());
    w.write_record(&header)?;
    for (r, id) in m.entity_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.values.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Ordered feature lists fixed on the source data and reused to reindex
/// every other dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSchema {
    pub version: u32,
    pub source_tag: String,
    pub cell_features: Vec<String>,
    pub drug_features: Vec<String>,
}

pub const SCHEMA_VERSION: u32 = 1;

impl FeatureSchema {
    pub fn new(source_tag: impl Into<String>, cell_features: Vec<String>, drug_features: Vec<String>) -> Result<Self> {
        let schema = FeatureSchema {
            version: SCHEMA_VERSION,
            source_tag: source_tag.into(),
            cell_features,
            drug_features,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        for (kind, list) in [("cell", &self.cell_features), ("drug", &self.drug_features)] {
            if list.is_empty() {
                return Err(Error::InvalidInput(format!("schema has no {kind} features")));
            }
            unique_index(list, "feature")?;
            if let Some(bad) = list
                .iter()
                .find(|f| f.is_empty() || f.contains('\n') || f.starts_with('['))
            {
                return Err(Error::InvalidInput(format!("unusable feature id `{bad}`")));
            }
        }
        if self.source_tag.contains('\n') {
            return Err(Error::InvalidInput("source_tag must be a single line".into()));
        }
        Ok(())
    }

    pub fn features(&self, kind: ModalityKind) -> &[String] {
        match kind {
            ModalityKind::Cell => &self.cell_features,
            ModalityKind::Drug => &self.drug_features,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("version = {}\nsource_tag = {}\n[cell]\n", self.version, self.source_tag);
        for f in &self.cell_features {
            s.push_str(f);
            s.push('\n');
        }
        s.push_str("[drug]\n");
        for f in &self.drug_features {
            s.push_str(f);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: "<schema>".into(),
            line: line as u64,
            message: msg,
        };
        let mut version = None;
        let mut source_tag = None;
        let mut section: Option<ModalityKind> = None;
        let (mut cell, mut drug) = (Vec::new(), Vec::new());
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            let n = i + 1;
            match line {
                "" => continue,
                "[cell]" => section = Some(ModalityKind::Cell),
                "[drug]" => section = Some(ModalityKind::Drug),
                _ => match section {
                    Some(ModalityKind::Cell) => cell.push(line.to_string()),
                    Some(ModalityKind::Drug) => drug.push(line.to_string()),
                    None => {
                        let (k, v) = line
                            .split_once('=')
                            .ok_or_else(|| bad(n, format!("expected `key = value`, got `{line}`")))?;
                        match k.trim() {
                            "version" => {
                                version = Some(
                                    v.trim()
                                        .parse::<u32>()
                                        .map_err(|_| bad(n, format!("invalid version `{}`", v.trim())))?,
                                )
                            }
                            "source_tag" => source_tag = Some(v.trim().to_string()),
                            other => return Err(bad(n, format!("unknown key `{other}`"))),
                        }
                    }
                },
            }
        }
        let version = version.ok_or_else(|| bad(0, "missing version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(bad(0, format!("unsupported schema version {version}")));
        }
        let schema = FeatureSchema {
            version,
            source_tag: source_tag.ok_or_else(|| bad(0, "missing source_tag".into()))?,
            cell_features: cell,
            drug_features: drug,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized schema.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_text().as_bytes()).into()
    }

    pub fn hex_digest(&self) -> String {
        hex::encode(self.digest())
    }
}

fn first_seen_union<'a>(lists: impl Iterator<Item = &'a [String]>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for list in lists {
        for f in list {
            if seen.insert(f.as_str()) {
                out.push(f.clone());
            }
        }
    }
    out
}

/// Schema over the features of the source matrices, in first-seen order.
pub fn build_schema<T: Scalar>(
    source_tag: &str,
    cell_matrices: &[&FeatureMatrix<T>],
    drug_matrices: &[&FeatureMatrix<T>],
) -> Result<FeatureSchema> {
    for (expected, list) in [(ModalityKind::Cell, cell_matrices), (ModalityKind::Drug, drug_matrices)] {
        if list.is_empty() {
            return Err(Error::InvalidInput(format!("no {expected} matrices given")));
        }
        if let Some(m) = list.iter().find(|m| m.kind() != expected) {
            return Err(Error::InvalidInput(format!(
                "{} matrix passed on the {expected} side",
                m.kind()
            )));
        }
    }
    FeatureSchema::new(
        source_tag,
        first_seen_union(cell_matrices.iter().map(|m| m.feature_ids())),
        first_seen_union(drug_matrices.iter().map(|m| m.feature_ids())),
    )
}

/// Reorders columns to the schema: missing features are zero-filled and
/// features outside the schema are dropped. Entity rows are unchanged.
pub fn reindex_to_schema<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    schema: &FeatureSchema,
    side: ModalityKind,
) -> Result<FeatureMatrix<T>> {
    let target = schema.features(side);
    let source: HashMap<&str, usize> = matrix
        .feature_ids()
        .iter()
        .enumerate()
        .map(|(i, f)| (f.as_str(), i))
        .collect();
    let mapping: Vec<Option<usize>> = target.iter().map(|f| source.get(f.as_str()).copied()).collect();
    let mut values = Matrix::zeros(matrix.n_entities(), target.len());
    for r in 0..matrix.n_entities() {
        let src = matrix.values().row(r);
        for (dst, m) in values.row_mut(r).iter_mut().zip(&mapping) {
            if let Some(j) = m {
                *dst = src[*j];
            }
        }
    }
    FeatureMatrix::new(matrix.entity_ids().to_vec(), target.to_vec(), values, side)
}

/// Binary drug-response label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Resistant = 0,
    Sensitive = 1,
}

impl Label {
    pub fn from_bool(sensitive: bool) -> Self {
        if sensitive {
            Label::Sensitive
        } else {
            Label::Resistant
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Sensitive
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn value<T: Scalar>(self) -> T {
        if self.is_positive() {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "0" => Ok(Label::Resistant),
            "1" => Ok(Label::Sensitive),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ResponsePair {
    pub cell_id: String,
    pub drug_id: String,
    pub label: Label,
}

impl ResponsePair {
    pub fn new(cell_id: impl Into<String>, drug_id: impl Into<String>, label: Label) -> Self {
        ResponsePair {
            cell_id: cell_id.into(),
            drug_id: drug_id.into(),
            label,
        }
    }
}

/// Domain a pair dataset was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetTag {
    SourceCellLine,
    CrossDatasetCellLine,
    Patient,
    Synthetic,
}

/// Labeled pairs resolved against a cell and a drug feature matrix.
#[derive(Clone, Debug)]
pub struct PairDataset<T> {
    pairs: Vec<ResponsePair>,
    rows: Vec<(usize, usize)>,
    cell_matrix: Arc<FeatureMatrix<T>>,
    drug_matrix: Arc<FeatureMatrix<T>>,
    tag: DatasetTag,
    schema_hash: Option<[u8; 32]>,
}

impl<T: Scalar> PairDataset<T> {
    /// Builds a dataset; every pair must resolve in both matrices.
    pub fn new(
        pairs: Vec<ResponsePair>,
        cell_matrix: Arc<FeatureMatrix<T>>,
        drug_matrix: Arc<FeatureMatrix<T>>,
        tag: DatasetTag,
    ) -> Result<Self> {
        let (ds, dropped) = Self::resolve(pairs, cell_matrix, drug_matrix, tag)?;
        if let Some(p) = dropped.first() {
            return Err(Error::InvalidInput(format!(
                "pair ({}, {}) references an unknown entity",
                p.cell_id, p.drug_id
            )));
        }
        Ok(ds)
    }

    /// Builds a dataset from the resolvable pairs and returns the rest.
    pub fn resolve(
        pairs: Vec<ResponsePair>,
        cell_matrix: Arc<FeatureMatrix<T>>,
        drug_matrix: Arc<FeatureMatrix<T>>,
        tag: DatasetTag,
    ) -> Result<(Self, Vec<ResponsePair>)> {
        if cell_matrix.kind() != ModalityKind::Cell || drug_matrix.kind() != ModalityKind::Drug {
            return Err(Error::InvalidInput(
                "pair dataset needs a cell matrix and a drug matrix".into(),
            ));
        }
        let mut kept = Vec::with_capacity(pairs.len());
        let mut rows = Vec::with_capacity(pairs.len());
        let mut dropped = Vec::new();
        for p in pairs {
            match (
                cell_matrix.entity_index(&p.cell_id),
                drug_matrix.entity_index(&p.drug_id),
            ) {
                (Some(c), Some(d)) => {
                    rows.push((c, d));
                    kept.push(p);
                }
                _ => dropped.push(p),
            }
        }
        Ok((
            PairDataset {
                pairs: kept,
                rows,
                cell_matrix,
                drug_matrix,
                tag,
                schema_hash: None,
            },
            dropped,
        ))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[ResponsePair] {
        &self.pairs
    }

    pub fn pair(&self, i: usize) -> &ResponsePair {
        &self.pairs[i]
    }

    /// `(cell row, drug row)` of each pair.
    pub fn rows(&self) -> &[(usize, usize)] {
        &self.rows
    }

    pub fn cell_matrix(&self) -> &Arc<FeatureMatrix<T>> {
        &self.cell_matrix
    }

    pub fn drug_matrix(&self) -> &Arc<FeatureMatrix<T>> {
        &self.drug_matrix
    }

    pub fn tag(&self) -> DatasetTag {
        self.tag
    }

    pub fn schema_hash(&self) -> Option<[u8; 32]> {
        self.schema_hash
    }

    pub fn with_schema_hash(mut self, hash: [u8; 32]) -> Self {
        self.schema_hash = Some(hash);
        self
    }

    pub fn labels(&self) -> Vec<Label> {
        self.pairs.iter().map(|p| p.label).collect()
    }

    pub fn label_values(&self) -> Vec<T> {
        self.pairs.iter().map(|p| p.label.value()).collect()
    }

    /// `(negatives, positives)`
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.pairs.iter().filter(|p| p.label.is_positive()).count();
        (self.len() - pos, pos)
    }

    /// Pairs at `indices`, in that order, sharing the same matrices.
    pub fn subset(&self, indices: &[usize]) -> PairDataset<T> {
        PairDataset {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            cell_matrix: Arc::clone(&self.cell_matrix),
            drug_matrix: Arc::clone(&self.drug_matrix),
            tag: self.tag,
            schema_hash: self.schema_hash,
        }
    }

    /// Same pairs against replacement matrices with identical entity order.
    pub fn with_matrices(
        &self,
        cell_matrix: Arc<FeatureMatrix<T>>,
        drug_matrix: Arc<FeatureMatrix<T>>,
    ) -> Result<PairDataset<T>> {
        if cell_matrix.entity_ids() != self.cell_matrix.entity_ids()
            || drug_matrix.entity_ids() != self.drug_matrix.entity_ids()
        {
            return Err(Error::InvalidInput(
                "replacement matrices must keep the entity order".into(),
            ));
        }
        Ok(PairDataset {
            pairs: self.pairs.clone(),
            rows: self.rows.clone(),
            cell_matrix,
            drug_matrix,
            tag: self.tag,
            schema_hash: self.schema_hash,
        })
    }

    /// Cell feature rows for the given pairs.
    pub fn cell_batch(&self, indices: &[usize]) -> Matrix<T> {
        let rows: Vec<usize> = indices.iter().map(|&i| self.rows[i].0).collect();
        self.cell_matrix.values().select_rows(&rows)
    }

    /// Drug feature rows for the given pairs.
    pub fn drug_batch(&self, indices: &[usize]) -> Matrix<T> {
        let rows: Vec<usize> = indices.iter().map(|&i| self.rows[i].1).collect();
        self.drug_matrix.values().select_rows(&rows)
    }

    /// Distinct cell rows referenced by the pairs, ascending.
    pub fn cell_rows(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct drug rows referenced by the pairs, ascending.
    pub fn drug_rows(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.1).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Result of reading a pair table.
#[derive(Debug)]
pub struct LoadedPairs<T> {
    pub dataset: PairDataset<T>,
    /// Rows whose cell or drug id is absent from the matrices.
    pub dropped: usize,
}

/// Reads a `cell_id,drug_id,label` table and resolves it against the matrices.
pub fn load_response_pairs<T: Scalar>(
    path: impl AsRef<Path>,
    cell_matrix: Arc<FeatureMatrix<T>>,
    drug_matrix: Arc<FeatureMatrix<T>>,
    tag: DatasetTag,
) -> Result<LoadedPairs<T>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_parse_error(path, e))?.clone();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let (ci, di, li) = (col("cell_id")?, col("drug_id")?, col("label")?);
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_parse_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let label = Label::parse(&record[li]).map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid label `{}`: expected 0 or 1", record[li].trim()),
        })?;
        pairs.push(ResponsePair::new(record[ci].trim(), record[di].trim(), label));
    }
    let (dataset, dropped) = PairDataset::resolve(pairs, cell_matrix, drug_matrix, tag)?;
    Ok(LoadedPairs {
        dataset,
        dropped: dropped.len(),
    })
}

pub fn write_response_pairs<T: Scalar>(ds: &PairDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell_id", "drug_id", "label"])?;
    for p in ds.pairs() {
        w.write_record([p.cell_id.as_str(), p.drug_id.as_str(), &p.label.as_u8().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn fm(entities: &[&str], features: &[&str], rows: &[&[f64]], kind: ModalityKind) -> FeatureMatrix<f64> {
        FeatureMatrix::new(ids(entities), ids(features), Matrix::from_f64_rows(rows).unwrap(), kind).unwrap()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn load_simple_and_tab_delimited() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "id,expr:a,expr:b\nc1,1,2\nc2,3,4\n");
        let m: FeatureMatrix<f64> = load_feature_matrix(&p, ModalityKind::Cell).unwrap();
        assert_eq!(m.values(), &Matrix::from_f64_rows(&[[1., 2.], [3., 4.]]).unwrap());
        assert_eq!(m.entity_ids(), &ids(&["c1", "c2"]));
        assert_eq!(m.feature_ids(), &ids(&["expr:a", "expr:b"]));

        let p = write(&dir, "b.tsv", "id\texpr:a\texpr:b\nc1\t1\t2\nc2\t3\t4\n");
        let t: FeatureMatrix<f64> = load_feature_matrix(&p, ModalityKind::Cell).unwrap();
        assert_eq!(t, m);
    }

    #[test]
    fn empty_cell_imputes_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "id,expr:a,expr:b\nc1,,2\nc2,3,4\n");
        let m: FeatureMatrix<f64> = load_feature_matrix(&p, ModalityKind::Cell).unwrap();
        assert_eq!(m.values().get(0, 0), 0.0);
    }

    #[test]
    fn ingestion_errors() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write(&dir, "d.csv", "id,expr:a\nc1,1\nc1,2\n");
        let err = load_feature_matrix::<f64>(&dup, ModalityKind::Cell).unwrap_err();
        assert!(err.to_string().contains("c1"), "{err}");

        let text = write(&dir, "t.csv", "id,expr:a\nc1,abc\n");
        let err = load_feature_matrix::<f64>(&text, ModalityKind::Cell).unwrap_err();
        assert!(err.to_string().contains("abc"), "{err}");

        let ragged = write(&dir, "r.csv", "id,expr:a,expr:b\nc1,1\n");
        let err = load_feature_matrix::<f64>(&ragged, ModalityKind::Cell).unwrap_err();
        assert!(err.to_string().contains("ragged"), "{err}");

        let nonbinary = write(&dir, "m.csv", "id,mut:TP53\nc1,0.5\n");
        assert!(load_feature_matrix::<f64>(&nonbinary, ModalityKind::Cell).is_err());
    }

    #[test]
    fn matrix_file_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = fm(
            &["a", "b"],
            &["expr:x", "mut:y"],
            &[&[0.1 + 0.2, 1.0], &[-1e-300, 0.0]],
            ModalityKind::Cell,
        );
        let p = dir.path().join("m.csv");
        write_feature_matrix(&m, &p).unwrap();
        assert_eq!(load_feature_matrix::<f64>(&p, ModalityKind::Cell).unwrap(), m);
    }

    #[test]
    fn schema_first_seen_order() {
        let a = fm(&["c"], &["a", "b"], &[&[1., 2.]], ModalityKind::Cell);
        let b = fm(&["d"], &["b", "a"], &[&[1., 2.]], ModalityKind::Cell);
        let d1 = fm(&["x"], &["fp:1", "fp:2"], &[&[1., 0.]], ModalityKind::Drug);
        let d2 = fm(&["y"], &["desc:w"], &[&[3.]], ModalityKind::Drug);
        let s = build_schema("SRC", &[&a, &b], &[&d1, &d2]).unwrap();
        assert_eq!(s.cell_features, ids(&["a", "b"]));
        assert_eq!(s.drug_features, ids(&["fp:1", "fp:2", "desc:w"]));
        assert!(build_schema::<f64>("SRC", &[], &[&d1]).is_err());
        assert!(build_schema("SRC", &[&d1], &[&d2]).is_err());
    }

    #[test]
    fn schema_text_roundtrip() {
        let s = FeatureSchema::new("CTRP-GDSC", ids(&["expr:A", "mut:B"]), ids(&["fp:0"])).unwrap();
        let text = s.to_text();
        assert_eq!(
            text,
            "version = 1\nsource_tag = CTRP-GDSC\n[cell]\nexpr:A\nmut:B\n[drug]\nfp:0\n"
        );
        let back = FeatureSchema::from_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
        assert!(FeatureSchema::from_text("version = 1\nsource_tag = x\n[cell]\n[drug]\nfp:0\n").is_err());
        assert!(FeatureSchema::from_text("version = 1\nbogus = 2\n").is_err());
    }

    #[test]
    fn reindex_rules() {
        let s = FeatureSchema::new("S", ids(&["a", "b", "c"]), ids(&["d"])).unwrap();
        let m = fm(
            &["x", "y"],
            &["c", "a", "z"],
            &[&[1., 2., 9.], &[3., 4., 9.]],
            ModalityKind::Cell,
        );
        let r = reindex_to_schema(&m, &s, ModalityKind::Cell).unwrap();
        assert_eq!(r.feature_ids(), &ids(&["a", "b", "c"]));
        assert_eq!(
            r.values(),
            &Matrix::from_f64_rows(&[[2., 0., 1.], [4., 0., 3.]]).unwrap()
        );
        assert_eq!(reindex_to_schema(&r, &s, ModalityKind::Cell).unwrap(), r);
    }

    #[test]
    fn expression_only_target_zero_fills_mutations() {
        let s = FeatureSchema::new("S", ids(&["expr:g1", "mut:g1", "expr:g2", "mut:g2"]), ids(&["fp:0"])).unwrap();
        let tcga = fm(&["p1"], &["expr:g2", "expr:g1"], &[&[0.3, 0.7]], ModalityKind::Cell);
        let r = reindex_to_schema(&tcga, &s, ModalityKind::Cell).unwrap();
        assert_eq!(r.values().row(0), &[0.7, 0.0, 0.3, 0.0]);
    }

    #[test]
    fn pair_loading() {
        let dir = tempfile::tempdir().unwrap();
        let cells = Arc::new(fm(&["c1", "c2"], &["expr:a"], &[&[1.], &[2.]], ModalityKind::Cell));
        let drugs = Arc::new(fm(&["d1", "d2"], &["fp:a"], &[&[1.], &[0.]], ModalityKind::Drug));
        let ok = write(&dir, "p.csv", "cell_id,drug_id,label\nc1,d1,1\nc2,d2,0\nc1,d2,0\n");
        let l = load_response_pairs(&ok, cells.clone(), drugs.clone(), DatasetTag::SourceCellLine).unwrap();
        assert_eq!((l.dataset.len(), l.dropped), (3, 0));
        assert_eq!(l.dataset.class_counts(), (2, 1));

        let unknown = write(&dir, "u.csv", "cell_id,drug_id,label\nc1,d1,1\nc2,d9,0\nc1,d2,0\n");
        let l = load_response_pairs(&unknown, cells.clone(), drugs.clone(), DatasetTag::SourceCellLine).unwrap();
        assert_eq!((l.dataset.len(), l.dropped), (2, 1));

        let bad = write(&dir, "b.csv", "cell_id,drug_id,label\nc1,d1,2\n");
        let err = load_response_pairs(&bad, cells, drugs, DatasetTag::SourceCellLine).unwrap_err();
        assert!(err.to_string().contains("invalid label"), "{err}");
    }
}
