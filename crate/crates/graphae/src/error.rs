use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] graphae_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("training diverged in epoch {epoch} (step {step}); last good checkpoint: {}", last_good.display())]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: PathBuf,
    },
    #[error("no results to report")]
    EmptyResults,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Error {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
