//! Dataset ingestion, pool splitting with isolated-dataset bookkeeping, and
//! persistence of pairs and models.
//!
//! File formats (UTF-8, `.` decimal separator, floats written in shortest
//! round-trip form):
//!
//! - fingerprints: long-format CSV, one row per reading, header
//!   `dataset_id,fingerprint_id,x_m,y_m,floor,mac,rssi_dbm`;
//! - pairs: CSV with `dataset_id,fp_a_id,fp_b_id`, the 14 feature columns in
//!   canonical order, then `label_m`;
//! - manifests: CSV `dataset_id,role,source,fingerprint_count,checksum`;
//! - models: JSON object `{"format", "schema_version", "model"}`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fingerprint::{clip_fingerprint, Feature, Fingerprint, PairRecord, PipelineConfig, FEATURE_COUNT};
use crate::learners::TrainedModel;

pub const MODEL_FORMAT: &str = "fpdist-model";
pub const MODEL_SCHEMA_VERSION: u64 = 1;

pub const FINGERPRINT_HEADER: [&str; 7] = ["dataset_id", "fingerprint_id", "x_m", "y_m", "floor", "mac", "rssi_dbm"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate reading for fingerprint {fingerprint_id}, mac {mac}")]
    DuplicateReading { line: u64, fingerprint_id: String, mac: String },
    #[error("dataset contains no usable fingerprints")]
    EmptyDataset,
    #[error("model schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("dataset `{0}` is not listed in the manifest")]
    UnknownDataset(String),
    #[error("dataset `{0}` is listed twice in the manifest")]
    DuplicateDataset(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(io) => DataError::Io(io),
            kind => DataError::Parse { line, message: format!("{kind:?}") },
        }
    }
}

/// Train/validation/test fractions of the pooled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), String> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("split fractions must be in [0, 1] and sum to 1, got {parts:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// One row per (fingerprint, MAC) reading.
    LongCsv,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "long-csv" | "longcsv" | "csv" => Ok(InputFormat::LongCsv),
            other => Err(format!("unknown input format `{other}` (supported: long-csv)")),
        }
    }
}

/// Result of loading a fingerprint file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    /// Clipped fingerprints in order of first appearance.
    pub fingerprints: Vec<Fingerprint>,
    /// Readings removed by clipping.
    pub dropped_readings: usize,
    /// Fingerprints with no readings left after clipping.
    pub dropped_fingerprints: Vec<String>,
}

/// Normalises a MAC to lowercase colon-separated octets; accepts `:`, `-`
/// or `.` separators or none.
pub fn normalize_mac(raw: &str) -> Option<String> {
    let hex: String = raw.trim().chars().filter(|c| !matches!(c, ':' | '-' | '.')).collect();
    if hex.len() != 12 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let hex = hex.to_ascii_lowercase();
    Some((0..6).map(|i| &hex[2 * i..2 * i + 2]).collect::<Vec<_>>().join(":"))
}

fn parse_number<T: FromStr>(field: &str, name: &str, line: u64) -> Result<T, DataError> {
    field
        .trim()
        .replace('\u{2212}', "-")
        .parse()
        .map_err(|_| DataError::Parse { line, message: format!("{name} `{field}` is not a number") })
}

pub fn load_fingerprints(path: &Path, format: InputFormat, cfg: &PipelineConfig) -> Result<LoadReport, DataError> {
    match format {
        InputFormat::LongCsv => read_fingerprints(BufReader::new(File::open(path)?), cfg),
    }
}

/// Parses long-format CSV, validates it and clips every fingerprint.
pub fn read_fingerprints<R: Read>(reader: R, cfg: &PipelineConfig) -> Result<LoadReport, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| DataError::Parse { line: 1, message: format!("missing column `{name}`") })
    };
    let idx: Vec<usize> = FINGERPRINT_HEADER.iter().map(|h| col(h)).collect::<Result<_, _>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Fingerprint> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let dataset_id = field(0).to_string();
        let fp_id = field(1).to_string();
        if dataset_id.is_empty() || fp_id.is_empty() {
            return Err(DataError::Parse { line, message: "empty dataset_id or fingerprint_id".into() });
        }
        let x_m: f64 = parse_number(field(2), "x_m", line)?;
        let y_m: f64 = parse_number(field(3), "y_m", line)?;
        let floor: i32 = parse_number(field(4), "floor", line)?;
        let mac = normalize_mac(field(5)).ok_or_else(|| DataError::Parse { line, message: format!("bad MAC address `{}`", field(5)) })?;
        let rssi: f64 = parse_number(field(6), "rssi_dbm", line)?;
        if !x_m.is_finite() || !y_m.is_finite() || !rssi.is_finite() {
            return Err(DataError::Parse { line, message: "non-finite coordinate or RSSI".into() });
        }

        let fp = by_id.entry(fp_id.clone()).or_insert_with(|| {
            order.push(fp_id.clone());
            Fingerprint { id: fp_id.clone(), dataset_id: dataset_id.clone(), x_m, y_m, floor, readings: BTreeMap::new() }
        });
        if fp.dataset_id != dataset_id || fp.x_m != x_m || fp.y_m != y_m || fp.floor != floor {
            return Err(DataError::Parse { line, message: format!("fingerprint {fp_id} has inconsistent dataset, position or floor") });
        }
        if fp.readings.insert(mac.clone(), rssi).is_some() {
            return Err(DataError::DuplicateReading { line, fingerprint_id: fp_id, mac });
        }
    }

    let mut fingerprints = Vec::with_capacity(order.len());
    let mut dropped_readings = 0;
    let mut dropped_fingerprints = Vec::new();
    for id in order {
        let raw = by_id.remove(&id).expect("id recorded on insert");
        match clip_fingerprint(&raw, cfg) {
            Ok(fp) => {
                dropped_readings += raw.readings.len() - fp.readings.len();
                fingerprints.push(fp);
            }
            Err(_) => {
                dropped_readings += raw.readings.len();
                dropped_fingerprints.push(id);
            }
        }
    }
    if fingerprints.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(LoadReport { fingerprints, dropped_readings, dropped_fingerprints })
}

pub fn write_fingerprints<W: Write>(fps: &[Fingerprint], out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FINGERPRINT_HEADER)?;
    for fp in fps {
        for (mac, rssi) in &fp.readings {
            w.write_record([
                &fp.dataset_id,
                &fp.id,
                &fp.x_m.to_string(),
                &fp.y_m.to_string(),
                &fp.floor.to_string(),
                mac,
                &rssi.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_fingerprints(fps: &[Fingerprint], path: &Path) -> Result<(), DataError> {
    write_fingerprints(fps, BufWriter::new(File::create(path)?))
}

fn pair_header() -> Vec<String> {
    let mut h: Vec<String> = ["dataset_id", "fp_a_id", "fp_b_id"].iter().map(|s| s.to_string()).collect();
    h.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    h.push("label_m".into());
    h
}

pub fn write_pairs<W: Write>(pairs: &[PairRecord], out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(pair_header())?;
    for p in pairs {
        let mut rec = vec![p.dataset_id.clone(), p.fp_a_id.clone(), p.fp_b_id.clone()];
        rec.extend(p.features.iter().map(f64::to_string));
        rec.push(p.label_m.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a pair file. A header-only or empty file yields no pairs.
pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<PairRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let expected = pair_header();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(DataError::Parse { line: 1, message: format!("pair file header must be `{}`", expected.join(",")) });
    }
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut features = [0.0; FEATURE_COUNT];
        for (i, f) in features.iter_mut().enumerate() {
            *f = parse_number(&record[3 + i], Feature::ALL[i].name(), line)?;
        }
        pairs.push(PairRecord {
            dataset_id: record[0].to_string(),
            fp_a_id: record[1].to_string(),
            fp_b_id: record[2].to_string(),
            features,
            label_m: parse_number(&record[3 + FEATURE_COUNT], "label_m", line)?,
        });
    }
    Ok(pairs)
}

pub fn export_pairs(pairs: &[PairRecord], path: &Path) -> Result<(), DataError> {
    write_pairs(pairs, BufWriter::new(File::create(path)?))
}

pub fn import_pairs(path: &Path) -> Result<Vec<PairRecord>, DataError> {
    read_pairs(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Split of each pair, indexed like the pair list it was computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub pair_ids: Vec<String>,
    pub splits: Vec<Split>,
}

impl SplitAssignment {
    /// `(train, validation, test)` sizes.
    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |s: Split| self.splits.iter().filter(|x| **x == s).count();
        (c(Split::Train), c(Split::Validation), c(Split::Test))
    }

    pub fn select<'a>(&self, pairs: &'a [PairRecord], split: Split) -> Vec<&'a PairRecord> {
        pairs.iter().zip(&self.splits).filter(|(_, s)| **s == split).map(|(p, _)| p).collect()
    }
}

/// Uniformly random partition of `pairs` into train/validation/test.
///
/// Sizes are `round(n * train)`, `round(n * validation)` and the remainder;
/// which pair lands where is a seeded shuffle of the pair indices.
pub fn split_pool(pairs: &[PairRecord], fractions: &SplitFractions, seed: u64) -> Result<SplitAssignment, DataError> {
    fractions.validate().map_err(DataError::InvalidConfig)?;
    let n = pairs.len();
    let n_train = ((n as f64 * fractions.train).round() as usize).min(n);
    let n_val = ((n as f64 * fractions.validation).round() as usize).min(n - n_train);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in idx.iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(SplitAssignment { pair_ids: pairs.iter().map(PairRecord::pair_id).collect(), splits })
}

pub fn write_split_manifest<W: Write>(pairs: &[PairRecord], assignment: &SplitAssignment, out: W) -> Result<(), DataError> {
    #[derive(Serialize)]
    struct Row<'a> {
        pair_index: usize,
        pair_id: &'a str,
        split: Split,
    }
    let mut w = csv::Writer::from_writer(out);
    for (i, (id, s)) in assignment.pair_ids.iter().zip(&assignment.splits).enumerate().take(pairs.len()) {
        w.serialize(Row { pair_index: i, pair_id: id, split: *s })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetRole {
    /// Merged into the train/validation/test pool.
    Pool,
    /// Held out entirely; used only for final generalisation checks.
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub role: DatasetRole,
    pub source: String,
    pub fingerprint_count: usize,
    /// SHA-256 of the source file, hex encoded.
    pub checksum: String,
}

pub fn checksum_file(path: &Path) -> Result<String, DataError> {
    let mut hasher = Sha256::new();
    let mut f = BufReader::new(File::open(path)?);
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn read_manifests(path: &Path) -> Result<Vec<DatasetManifest>, DataError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows: Vec<DatasetManifest> = rdr.deserialize().collect::<Result<_, _>>()?;
    let mut seen = HashSet::new();
    for m in &rows {
        if !seen.insert(m.dataset_id.clone()) {
            return Err(DataError::DuplicateDataset(m.dataset_id.clone()));
        }
    }
    Ok(rows)
}

pub fn write_manifests(manifests: &[DatasetManifest], path: &Path) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    for m in manifests {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

/// Pool pairs split three ways, plus isolated pairs grouped by dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolPartition {
    pub train: Vec<PairRecord>,
    pub validation: Vec<PairRecord>,
    pub test: Vec<PairRecord>,
    pub isolated: BTreeMap<String, Vec<PairRecord>>,
    /// Assignment over the pool pairs only, in input order.
    pub assignment: SplitAssignment,
}

/// Separates isolated datasets from the pool, then splits the pool.
///
/// With an empty manifest list every pair is pooled; otherwise every pair's
/// dataset must be listed.
pub fn partition_pairs(
    pairs: &[PairRecord],
    manifests: &[DatasetManifest],
    fractions: &SplitFractions,
    seed: u64,
) -> Result<PoolPartition, DataError> {
    let mut roles: HashMap<&str, DatasetRole> = HashMap::new();
    for m in manifests {
        if roles.insert(m.dataset_id.as_str(), m.role).is_some() {
            return Err(DataError::DuplicateDataset(m.dataset_id.clone()));
        }
    }
    let mut pool = Vec::new();
    let mut isolated: BTreeMap<String, Vec<PairRecord>> = BTreeMap::new();
    for p in pairs {
        let role = if manifests.is_empty() {
            DatasetRole::Pool
        } else {
            *roles.get(p.dataset_id.as_str()).ok_or_else(|| DataError::UnknownDataset(p.dataset_id.clone()))?
        };
        match role {
            DatasetRole::Pool => pool.push(p.clone()),
            DatasetRole::Isolated => isolated.entry(p.dataset_id.clone()).or_default().push(p.clone()),
        }
    }
    let assignment = split_pool(&pool, fractions, seed)?;
    let take = |s: Split| assignment.select(&pool, s).into_iter().cloned().collect::<Vec<_>>();
    Ok(PoolPartition { train: take(Split::Train), validation: take(Split::Validation), test: take(Split::Test), isolated, assignment })
}

#[derive(Serialize, Deserialize)]
struct ModelEnvelope<M> {
    format: String,
    schema_version: u64,
    model: M,
}

pub fn write_model<W: Write>(model: &TrainedModel, out: W) -> Result<(), DataError> {
    let env = ModelEnvelope { format: MODEL_FORMAT.to_string(), schema_version: MODEL_SCHEMA_VERSION, model };
    serde_json::to_writer_pretty(out, &env).map_err(|e| DataError::Io(e.into()))
}

/// Parses a model file, checking the format tag and schema version first.
pub fn read_model<R: Read>(reader: R) -> Result<TrainedModel, DataError> {
    let value: serde_json::Value = serde_json::from_reader(reader).map_err(|e| DataError::CorruptModel(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
        return Err(DataError::CorruptModel(format!("missing `format: {MODEL_FORMAT}` tag")));
    }
    let version =
        value.get("schema_version").and_then(|v| v.as_u64()).ok_or_else(|| DataError::CorruptModel("missing schema_version".into()))?;
    if version != MODEL_SCHEMA_VERSION {
        return Err(DataError::VersionMismatch { found: version, expected: MODEL_SCHEMA_VERSION });
    }
    let env: ModelEnvelope<TrainedModel> = serde_json::from_value(value).map_err(|e| DataError::CorruptModel(e.to_string()))?;
    Ok(env.model)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, DataError> {
    read_model(BufReader::new(File::open(path)?))
}
