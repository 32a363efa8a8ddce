//! On-disk containers for layer features, labels, manifests and probe
//! checkpoints.
//!
//! Feature files (`PFV1`) and label files (`PLB1`) are little-endian,
//! self-describing and end with a CRC32 (IEEE) of the payload. Features are
//! stored as `f32` and widened to `f64` on read. The manifest is a JSON
//! sidecar naming the two files and the split assignment.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use infoprobe_core::trainer::Splits;
use infoprobe_core::{Matrix, ProbeSpec, ProbeState, ToyNetwork};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEATURE_MAGIC: [u8; 4] = *b"PFV1";
pub const LABEL_MAGIC: [u8; 4] = *b"PLB1";
pub const FORMAT_VERSION: u32 = 1;
/// 32-bit little-endian IEEE float.
pub const DTYPE_F32: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

const FEATURE_HEADER: usize = 4 + 4 + 4 + 8 + 8;
const LABEL_HEADER: usize = 4 + 4 + 8 + 4;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },

    #[error("unsupported {what} {found}")]
    Unsupported { what: &'static str, found: u32 },

    #[error("truncated file: header declares {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("{extra} trailing bytes after the checksum")]
    TrailingBytes { extra: u64 },

    /// The stored checksum does not match the payload.
    #[error("checksum mismatch over payload bytes {start}..{end}: stored {stored:08x}, computed {computed:08x}")]
    Corrupt {
        start: u64,
        end: u64,
        stored: u32,
        computed: u32,
    },

    #[error("invalid contents: {0}")]
    Invalid(String),

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),

    #[error("filter removed every class (largest class has {max_count} rows, n_min = {n_min})")]
    EmptyResult { n_min: usize, max_count: usize },

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<DataError>,
    },
}

impl DataError {
    /// The underlying error with any file context removed.
    pub fn root(&self) -> &DataError {
        match self {
            DataError::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    fn at(self, path: &Path) -> DataError {
        DataError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().expect("4 bytes"))
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().expect("8 bytes"))
    }
}

fn check_header(bytes: &[u8], header: usize, magic: [u8; 4]) -> Result<()> {
    if bytes.len() < 4 {
        return Err(DataError::Truncated {
            expected: header as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes[..4] != magic {
        return Err(DataError::BadMagic {
            found: bytes[..4].try_into().expect("4 bytes"),
            expected: magic,
        });
    }
    if bytes.len() < header {
        return Err(DataError::Truncated {
            expected: header as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(())
}

fn check_body(bytes: &[u8], header: usize, payload: u64) -> Result<&[u8]> {
    let expected = header as u64 + payload + 4;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(DataError::Truncated { expected, found });
    }
    if found > expected {
        return Err(DataError::TrailingBytes {
            extra: found - expected,
        });
    }
    let end = header + payload as usize;
    let body = &bytes[header..end];
    let stored = u32::from_le_bytes(bytes[end..end + 4].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(DataError::Corrupt {
            start: header as u64,
            end: end as u64,
            stored,
            computed,
        });
    }
    Ok(body)
}

/// Serialises `m` as a `PFV1` container.
pub fn encode_features(m: &Matrix) -> Result<Vec<u8>> {
    let mut payload = Vec::with_capacity(m.len() * 4);
    for (i, &v) in m.as_slice().iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(DataError::Invalid(format!(
                "value {v} at row {}, column {} is not representable as a finite f32",
                i / m.cols().max(1),
                i % m.cols().max(1)
            )));
        }
        payload.extend_from_slice(&f.to_le_bytes());
    }
    let mut out = Vec::with_capacity(FEATURE_HEADER + payload.len() + 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<Matrix> {
    check_header(bytes, FEATURE_HEADER, FEATURE_MAGIC)?;
    let mut c = Cursor { bytes, pos: 4 };
    let version = c.u32();
    if version != FORMAT_VERSION {
        return Err(DataError::Unsupported {
            what: "version",
            found: version,
        });
    }
    let dtype = c.u32();
    if dtype != DTYPE_F32 {
        return Err(DataError::Unsupported {
            what: "dtype code",
            found: dtype,
        });
    }
    let rows = c.u64();
    let cols = c.u64();
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| DataError::Invalid(format!("declared shape {rows}x{cols} overflows")))?;
    let body = check_body(bytes, FEATURE_HEADER, payload)?;
    let data: Vec<f64> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(DataError::Invalid(format!("non-finite value at element {i}")));
    }
    Matrix::from_vec(rows as usize, cols as usize, data).map_err(|e| DataError::Invalid(e.to_string()))
}

/// CRC32 of each row's stored `f32` bytes; identical rows in different
/// files give identical checksums.
pub fn row_checksums(m: &Matrix) -> Vec<u32> {
    m.row_iter()
        .map(|row| {
            let mut h = crc32fast::Hasher::new();
            for &v in row {
                h.update(&(v as f32).to_le_bytes());
            }
            h.finalize()
        })
        .collect()
}

pub fn write_features(path: &Path, m: &Matrix) -> Result<()> {
    let bytes = encode_features(m).map_err(|e| e.at(path))?;
    fs::write(path, bytes).map_err(|e| DataError::from(e).at(path))
}

pub fn read_features(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| DataError::from(e).at(path))?;
    decode_features(&bytes).map_err(|e| e.at(path))
}

/// Class ids with their declared class count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabelSet {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(DataError::Invalid(format!(
                "class id {bad} not below num_classes {num_classes}"
            )));
        }
        Ok(Self { labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

pub fn encode_labels(set: &LabelSet) -> Result<Vec<u8>> {
    let classes = u32::try_from(set.num_classes)
        .map_err(|_| DataError::Invalid(format!("{} classes do not fit in u32", set.num_classes)))?;
    let mut payload = Vec::with_capacity(set.len() * 4);
    for &y in &set.labels {
        if y >= set.num_classes {
            return Err(DataError::Invalid(format!(
                "class id {y} not below num_classes {}",
                set.num_classes
            )));
        }
        payload.extend_from_slice(&(y as u32).to_le_bytes());
    }
    let mut out = Vec::with_capacity(LABEL_HEADER + payload.len() + 4);
    out.extend_from_slice(&LABEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    out.extend_from_slice(&classes.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelSet> {
    check_header(bytes, LABEL_HEADER, LABEL_MAGIC)?;
    let mut c = Cursor { bytes, pos: 4 };
    let version = c.u32();
    if version != FORMAT_VERSION {
        return Err(DataError::Unsupported {
            what: "version",
            found: version,
        });
    }
    let n = c.u64();
    let num_classes = c.u32() as usize;
    let payload = n
        .checked_mul(4)
        .ok_or_else(|| DataError::Invalid(format!("declared length {n} overflows")))?;
    let body = check_body(bytes, LABEL_HEADER, payload)?;
    let labels = body
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
        .collect();
    LabelSet::new(labels, num_classes)
}

pub fn write_labels(path: &Path, set: &LabelSet) -> Result<()> {
    let bytes = encode_labels(set).map_err(|e| e.at(path))?;
    fs::write(path, bytes).map_err(|e| DataError::from(e).at(path))
}

pub fn read_labels(path: &Path) -> Result<LabelSet> {
    let bytes = fs::read(path).map_err(|e| DataError::from(e).at(path))?;
    decode_labels(&bytes).map_err(|e| e.at(path))
}

/// JSON sidecar describing one layer's features. Paths are relative to
/// the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub model: String,
    pub layer: usize,
    pub task: String,
    pub class_names: Vec<String>,
    pub features: String,
    pub labels: String,
    pub rows: usize,
    pub cols: usize,
    pub splits: Splits,
    #[serde(default)]
    pub notes: Vec<String>,
    /// `relabel[old] = Some(new)` for classes kept by a filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relabel: Option<Vec<Option<usize>>>,
    /// Base network (JSON) whose layer outputs these features are; enables
    /// suffix probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooling: Option<String>,
    /// Per-row checksums that let readers verify row alignment across layers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_checksums: Option<Vec<u32>>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(DataError::Unsupported {
                what: "manifest version",
                found: self.format_version,
            });
        }
        self.splits
            .validate(self.rows)
            .map_err(|e| DataError::Invalid(format!("splits: {e}")))?;
        if let Some(sums) = &self.row_checksums {
            if sums.len() != self.rows {
                return Err(DataError::Invalid(format!(
                    "{} row checksums for {} rows",
                    sums.len(),
                    self.rows
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    manifest.validate().map_err(|e| e.at(path))?;
    fs::write(path, manifest.to_json()?).map_err(|e| DataError::from(e).at(path))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| DataError::from(e).at(path))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| DataError::from(e).at(path))?;
    m.validate().map_err(|e| e.at(path))?;
    Ok(m)
}

/// A manifest together with the files it names.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub features: Matrix,
    pub labels: LabelSet,
    pub network: Option<Arc<ToyNetwork>>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let features = read_features(&dir.join(&manifest.features))?;
    let labels = read_labels(&dir.join(&manifest.labels))?;
    let ctx = |e: DataError| e.at(manifest_path);
    if features.rows() != manifest.rows || features.cols() != manifest.cols {
        return Err(ctx(DataError::Invalid(format!(
            "manifest declares {}x{}, feature file holds {}x{}",
            manifest.rows,
            manifest.cols,
            features.rows(),
            features.cols()
        ))));
    }
    if labels.len() != manifest.rows {
        return Err(ctx(DataError::Invalid(format!(
            "{} labels for {} feature rows",
            labels.len(),
            manifest.rows
        ))));
    }
    if !manifest.class_names.is_empty() && manifest.class_names.len() != labels.num_classes {
        return Err(ctx(DataError::Invalid(format!(
            "{} class names for {} classes",
            manifest.class_names.len(),
            labels.num_classes
        ))));
    }
    if let Some(expected) = &manifest.row_checksums {
        if let Some(r) = row_checksums(&features).iter().zip(expected).position(|(a, b)| a != b) {
            return Err(ctx(DataError::Invalid(format!(
                "row {r} does not match its manifest checksum; rows are misaligned"
            ))));
        }
    }
    let network = match &manifest.network {
        Some(rel) => Some(Arc::new(read_network(&dir.join(rel))?)),
        None => None,
    };
    Ok(Dataset {
        manifest,
        features,
        labels,
        network,
    })
}

pub fn write_network(path: &Path, net: &ToyNetwork) -> Result<()> {
    let mut s = serde_json::to_string_pretty(net)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| DataError::from(e).at(path))
}

pub fn read_network(path: &Path) -> Result<ToyNetwork> {
    let text = fs::read_to_string(path).map_err(|e| DataError::from(e).at(path))?;
    let net: ToyNetwork = serde_json::from_str(&text).map_err(|e| DataError::from(e).at(path))?;
    // re-validate layer shapes, which deserialisation does not check
    ToyNetwork::from_layers(net.layers().to_vec()).map_err(|e| DataError::Invalid(e.to_string()).at(path))
}

/// Output of [`filter_min_class_count`].
#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub features: Matrix,
    pub labels: LabelSet,
    /// `relabel[old] = Some(new)` for surviving classes.
    pub relabel: Vec<Option<usize>>,
    /// Original indices of the rows that were kept, ascending.
    pub kept_rows: Vec<usize>,
}

/// Drops classes with fewer than `n_min` rows and renumbers the survivors
/// `0 … C′−1` in their original order.
pub fn filter_min_class_count(features: &Matrix, labels: &LabelSet, n_min: usize) -> Result<Filtered> {
    if n_min == 0 {
        return Err(DataError::Invalid("n_min must be at least 1".into()));
    }
    if features.rows() != labels.len() {
        return Err(DataError::Invalid(format!(
            "{} feature rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let counts = labels.counts();
    let mut relabel = vec![None; labels.num_classes];
    let mut next = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n >= n_min {
            relabel[c] = Some(next);
            next += 1;
        }
    }
    if next == 0 {
        return Err(DataError::EmptyResult {
            n_min,
            max_count: counts.iter().copied().max().unwrap_or(0),
        });
    }
    let kept_rows: Vec<usize> = (0..labels.len())
        .filter(|&i| relabel[labels.labels[i]].is_some())
        .collect();
    let new_labels = kept_rows
        .iter()
        .map(|&i| relabel[labels.labels[i]].expect("kept"))
        .collect();
    Ok(Filtered {
        features: features.select_rows(&kept_rows),
        labels: LabelSet::new(new_labels, next)?,
        relabel,
        kept_rows,
    })
}

/// Re-indexes split lists after rows were removed; dropped rows vanish.
pub fn remap_splits(splits: &Splits, kept_rows: &[usize], old_rows: usize) -> Splits {
    let mut position = vec![None; old_rows];
    for (new, &old) in kept_rows.iter().enumerate() {
        position[old] = Some(new);
    }
    let map = |v: &[usize]| v.iter().filter_map(|&i| position[i]).collect();
    Splits {
        train: map(&splits.train),
        valid: map(&splits.valid),
        test: map(&splits.test),
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    spec: ProbeSpec,
    params: Vec<String>,
}

/// Writes `<stem>.json` (spec and blob names) and one `PFV1` blob per
/// parameter tensor. Parameters are stored at 32-bit precision.
pub fn save_checkpoint(dir: &Path, stem: &str, state: &ProbeState) -> Result<()> {
    let mut names = Vec::with_capacity(state.params.len());
    for (k, p) in state.params.iter().enumerate() {
        let name = format!("{stem}.param{k}.pfv");
        write_features(&dir.join(&name), p)?;
        names.push(name);
    }
    let header = CheckpointHeader {
        format_version: MANIFEST_VERSION,
        spec: state.spec.clone(),
        params: names,
    };
    let path = dir.join(format!("{stem}.json"));
    let mut s = serde_json::to_string_pretty(&header)?;
    s.push('\n');
    fs::write(&path, s).map_err(|e| DataError::from(e).at(&path))
}

/// Reads a checkpoint written by [`save_checkpoint`]; suffix probes need
/// the base network they were trained on.
pub fn load_checkpoint(dir: &Path, stem: &str, base: Option<Arc<ToyNetwork>>) -> Result<ProbeState> {
    let path = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&path).map_err(|e| DataError::from(e).at(&path))?;
    let header: CheckpointHeader = serde_json::from_str(&text).map_err(|e| DataError::from(e).at(&path))?;
    let mut state = ProbeState::new(header.spec, base).map_err(|e| DataError::Invalid(e.to_string()).at(&path))?;
    let params = header
        .params
        .iter()
        .map(|name| read_features(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    state
        .set_params(params)
        .map_err(|e| DataError::Invalid(e.to_string()).at(&path))?;
    Ok(state)
}
