use std::path::{Path, PathBuf};

/// Errors of the file formats and commands.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] plumeseg_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{count} item(s) failed: {items}")]
    Partial { count: usize, items: String },
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        AppError::Json { path: path.to_path_buf(), source }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        AppError::Csv { path: path.to_path_buf(), source }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        AppError::Core(plumeseg_core::Error::Format(msg.into()))
    }

    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Core(plumeseg_core::Error::Config(msg.into()))
    }

    pub fn data(msg: impl Into<String>) -> Self {
        AppError::Core(plumeseg_core::Error::Data(msg.into()))
    }
}

/// Reads a whole file, attaching the path to failures.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| AppError::io(path, e))
}

/// Writes a whole file, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}
