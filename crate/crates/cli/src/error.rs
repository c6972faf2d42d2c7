use std::path::PathBuf;

use ovalwig_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Header { path: PathBuf, message: String },
    #[error("{}: payload holds {actual} bytes, header implies {expected}", path.display())]
    Length { path: PathBuf, expected: u64, actual: u64 },
    #[error("{}: dtype {found:?} is not f64le", path.display())]
    Dtype { path: PathBuf, found: String },
    #[error("{0} check(s) failed")]
    Check(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    /// 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if !e.is_validation() => 2,
            Error::Check(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
