//! Dataset formats, synthetic LR/HR pairs, and report/checkpoint persistence.
//!
//! Matrices are plain CSV (one row per line, 17 significant digits), while
//! manifests, reports and checkpoints are JSON. Every write goes to a
//! temporary file in the destination directory and is then renamed into place.

mod checkpoint;
mod matrix;
mod synthetic;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointParam, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use matrix::{parse_matrix, read_matrix, render_matrix, write_matrix, SYMMETRY_TOL};
pub use synthetic::{aggregation_map, generate_synthetic, module_labels, SyntheticConfig};

use crate::error::{Error, Result};
use crate::graph::Connectome;
use crate::metrics::MetricsReport;

/// One source-target pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub lr: Connectome,
    pub hr: Connectome,
}

impl Sample {
    /// Hex SHA-256 of both matrices' bytes; the id does not take part.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for c in [&self.lr, &self.hr] {
            h.update((c.n() as u64).to_le_bytes());
            for w in c.weights() {
                h.update(w.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Checks that `samples` is nonempty and size-consistent; returns `(n_s, n_t)`.
pub fn check_samples(samples: &[Sample]) -> Result<(usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Validation("dataset is empty".into()))?;
    let dims = (first.lr.n(), first.hr.n());
    for s in samples {
        if (s.lr.n(), s.hr.n()) != dims {
            return Err(Error::Validation(format!(
                "sample {} is {} -> {}, expected {} -> {}",
                s.id,
                s.lr.n(),
                s.hr.n(),
                dims.0,
                dims.1
            )));
        }
    }
    Ok(dims)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    /// Paths relative to the manifest's directory.
    pub lr: PathBuf,
    pub hr: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n_s: usize,
    pub n_t: usize,
    pub seed: u64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SyntheticConfig>,
    pub samples: Vec<SampleRecord>,
}

/// Writes `bytes` to `path` atomically (temporary file plus rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Writes `<stem>.json` and the per-sample CSV `<stem>.csv`.
pub fn write_report(report: &MetricsReport, json_path: &Path) -> Result<()> {
    write_json(report, json_path)?;
    write_atomic(&json_path.with_extension("csv"), report.to_csv().as_bytes())
}

/// Writes every sample as `<id>_lr.csv` / `<id>_hr.csv` plus `manifest.json` into `dir`.
pub fn write_dataset(
    samples: &[Sample],
    seed: u64,
    kind: &str,
    generator: Option<SyntheticConfig>,
    dir: &Path,
) -> Result<DatasetManifest> {
    let (n_s, n_t) = check_samples(samples)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(samples.len());
    for s in samples {
        let lr = PathBuf::from(format!("{}_lr.csv", s.id));
        let hr = PathBuf::from(format!("{}_hr.csv", s.id));
        write_matrix(&s.lr, &dir.join(&lr))?;
        write_matrix(&s.hr, &dir.join(&hr))?;
        records.push(SampleRecord { id: s.id.clone(), lr, hr });
    }
    let manifest = DatasetManifest {
        n_s,
        n_t,
        seed,
        kind: kind.into(),
        generator,
        samples: records,
    };
    write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Loads a manifest and every matrix it references, checking declared sizes.
pub fn load_dataset(manifest_path: &Path) -> Result<(DatasetManifest, Vec<Sample>)> {
    let manifest: DatasetManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for r in &manifest.samples {
        let lr = read_matrix(&base.join(&r.lr))?;
        let hr = read_matrix(&base.join(&r.hr))?;
        if lr.n() != manifest.n_s || hr.n() != manifest.n_t {
            return Err(Error::Validation(format!(
                "sample {} is {} -> {}, manifest declares {} -> {}",
                r.id,
                lr.n(),
                hr.n(),
                manifest.n_s,
                manifest.n_t
            )));
        }
        samples.push(Sample { id: r.id.clone(), lr, hr });
    }
    if samples.is_empty() {
        return Err(Error::Validation(format!("{}: manifest lists no samples", manifest_path.display())));
    }
    Ok((manifest, samples))
}

/// Hex SHA-256 over the given files' names and contents, in order.
pub fn hash_files(paths: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
        h.update(p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default().as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// The manifest plus every file it references.
pub fn dataset_files(manifest_path: &Path, manifest: &DatasetManifest) -> Vec<PathBuf> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut files = vec![manifest_path.to_path_buf()];
    for r in &manifest.samples {
        files.push(base.join(&r.lr));
        files.push(base.join(&r.hr));
    }
    files
}
