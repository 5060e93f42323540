use std::path::{Path, PathBuf};

use dda_core::nn::{decode_weights, encode_weights};
use dda_core::SupernetWeights;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightsFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid weights file: {source}")]
    Format { path: PathBuf, source: dda_core::Error },
}

pub fn save_weights(path: &Path, weights: &SupernetWeights) -> Result<(), WeightsFileError> {
    std::fs::write(path, encode_weights(weights)).map_err(|source| WeightsFileError::Io { path: path.into(), source })
}

pub fn load_weights(path: &Path) -> Result<SupernetWeights, WeightsFileError> {
    let bytes = std::fs::read(path).map_err(|source| WeightsFileError::Io { path: path.into(), source })?;
    decode_weights(&bytes).map_err(|source| WeightsFileError::Format { path: path.into(), source })
}
