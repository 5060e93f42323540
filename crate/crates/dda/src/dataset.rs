//! Synthetic pair datasets on disk: `clean/NNNNN.png`, `moire/NNNNN.png` and
//! a `manifest.json` whose paths are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use dda_core::prior::{moire_score, PriorConfig};
use dda_core::synth::{gen_pair, MoireParams};
use dda_core::train::TrainPair;
use dda_core::{Executor, Image};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pngio::{load_png, save_png, PngError};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub clean_path: String,
    pub moire_path: String,
    pub params: MoireParams,
    /// Moiré score of the 8-bit moiré image as stored on disk.
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Png(#[from] PngError),
    #[error("{path}: invalid manifest: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("{path}: manifest has no entries")]
    Empty { path: PathBuf },
    #[error("{path}: entry {index}: {reason}")]
    Entry { path: PathBuf, index: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.into(), source }
}

/// Writes `n` pairs of `height x width` images plus the manifest into
/// `out_dir` and returns the manifest entries. Pair `i` depends only on
/// `(seed, i)`, whatever the executor.
pub fn gen_dataset<E: Executor>(
    n: usize,
    seed: u64,
    height: usize,
    width: usize,
    out_dir: &Path,
    exec: &E,
) -> Result<Vec<ManifestEntry>, DatasetError> {
    for sub in ["clean", "moire"] {
        let dir = out_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let prior = PriorConfig::default();
    let entries = exec.map(n, |i| -> Result<ManifestEntry, DatasetError> {
        let pair = gen_pair(seed, i as u64, height, width);
        let clean_path = format!("clean/{i:05}.png");
        let moire_path = format!("moire/{i:05}.png");
        save_png(&out_dir.join(&clean_path), &pair.clean)?;
        save_png(&out_dir.join(&moire_path), &pair.moire)?;
        let stored = pair.moire.quantized_u8();
        let score = moire_score(&stored, &prior).expect("non-empty image").score;
        Ok(ManifestEntry {
            clean_path,
            moire_path,
            params: pair.params,
            score,
        })
    });
    let entries = entries.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_manifest(&out_dir.join(MANIFEST_NAME), &entries)?;
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(entries).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|source| DatasetError::Manifest { path: path.into(), source })?;
    if entries.is_empty() {
        return Err(DatasetError::Empty { path: path.into() });
    }
    Ok(entries)
}

/// A manifest with its images loaded.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub entries: Vec<ManifestEntry>,
    pub pairs: Vec<TrainPair>,
}

impl LoadedDataset {
    pub fn image_pairs(&self) -> Vec<(Image, Image)> {
        self.pairs.iter().map(|p| (p.moire.clone(), p.clean.clone())).collect()
    }
}

pub fn load_dataset<E: Executor>(manifest: &Path, exec: &E) -> Result<LoadedDataset, DatasetError> {
    let entries = read_manifest(manifest)?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let pairs = exec.map(entries.len(), |i| -> Result<TrainPair, DatasetError> {
        let e = &entries[i];
        let entry_err = |reason: String| DatasetError::Entry {
            path: manifest.into(),
            index: i,
            reason,
        };
        if !e.score.is_finite() {
            return Err(entry_err(format!("non-finite score {}", e.score)));
        }
        let moire = load_png(&root.join(&e.moire_path))?;
        let clean = load_png(&root.join(&e.clean_path))?;
        if !moire.same_dims(&clean) {
            return Err(entry_err(format!(
                "moire is {}x{} but clean is {}x{}",
                moire.height(),
                moire.width(),
                clean.height(),
                clean.width()
            )));
        }
        Ok(TrainPair {
            moire,
            clean,
            score: e.score,
        })
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(LoadedDataset { entries, pairs })
}
