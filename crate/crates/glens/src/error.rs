use std::io;
use std::path::PathBuf;

use glens_core::cropgen::CropError;
use glens_core::pss::PssError;
use glens_core::scenegen::SceneError;
use glens_core::stats::StatsError;
use glens_core::taxonomy::TaxonomyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlensError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Image { path: PathBuf, source: image::ImageError },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Crop(#[from] CropError),
    #[error(transparent)]
    Pss(#[from] PssError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("{0}")]
    Data(String),
}

impl GlensError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        GlensError::Io { path: path.into(), source }
    }

    /// 1 for usage, config and unreadable inputs; 2 for bad data.
    pub fn exit_code(&self) -> i32 {
        match self {
            GlensError::Io { .. } | GlensError::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = GlensError> = std::result::Result<T, E>;
