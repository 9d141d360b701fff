//! Loading the dataset named by `--data` and fingerprinting it.

use anyhow::Context;
use ktan::data::{normalize_rows, permute_prefix, read_libsvm_file, synthesize, SyntheticSpec};
use ktan::risk::Dataset;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{CmdResult, Failure};
use crate::settings::Settings;

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub source: String,
    /// SHA-256 over labels, sparsity pattern and value bits, in solve order.
    pub fingerprint: String,
    pub samples: usize,
    pub dim: usize,
    pub nnz: usize,
    pub order_seed: u64,
    pub dropped_zero_rows: usize,
}

pub fn load(settings: &Settings) -> CmdResult<(Dataset, DatasetInfo)> {
    let source = settings.data().map_err(Failure::usage)?;
    let raw = if source.starts_with("synth:") {
        let spec: SyntheticSpec = source.parse()?;
        synthesize(&spec)?.0
    } else {
        let dim = settings.get::<usize>("dim").map_err(Failure::usage)?;
        read_libsvm_file(&source, dim).map_err(|e| match e {
            ktan::Error::Io(io) => Failure::usage(anyhow::Error::from(io).context(format!("reading {source}"))),
            other => other.into(),
        })?
    };
    let (normalized, dropped) = if settings.flag("normalize").map_err(Failure::usage)? {
        normalize_rows(&raw)?
    } else {
        (raw, 0)
    };
    let order_seed = settings.get_or("permute_seed", 0u64).map_err(Failure::usage)?;
    let data = permute_prefix(&normalized, order_seed);
    let info = DatasetInfo {
        source,
        fingerprint: fingerprint(&data),
        samples: data.len(),
        dim: data.dim(),
        nnz: data.nnz(),
        order_seed,
        dropped_zero_rows: dropped,
    };
    Ok((data, info))
}

pub fn fingerprint(data: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((data.dim() as u64).to_le_bytes());
    h.update((data.len() as u64).to_le_bytes());
    for s in data.iter() {
        h.update(s.label.to_bits().to_le_bytes());
        h.update((s.indices.len() as u64).to_le_bytes());
        for (&j, &v) in s.indices.iter().zip(s.values) {
            h.update(j.to_le_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Path of the manifest written next to `trace`.
pub fn manifest_path(trace: &std::path::Path) -> std::path::PathBuf {
    trace.with_extension("manifest.json")
}

pub fn write_text(path: &std::path::Path, text: &str) -> CmdResult {
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::runtime)
}
