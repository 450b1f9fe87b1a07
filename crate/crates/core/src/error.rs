use std::path::PathBuf;

use thiserror::Error;

use crate::scoring::PixelClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ellipse parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid label image: {0}")]
    LabelImage(String),

    #[error("pixel ({x}, {y}) matches both {first:?} and {second:?}")]
    AmbiguousPixel {
        x: u32,
        y: u32,
        first: PixelClass,
        second: PixelClass,
    },

    #[error("invalid phantom spec: {0}")]
    Phantom(String),

    #[error("grid has {count} points, limit is {limit}")]
    GridTooLarge { count: u128, limit: u128 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("malformed record: {0}")]
    Record(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
