use std::io;

use thiserror::Error;

use crate::image::PixelIndex;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("pixel ({row}, {col}) is outside a {width}x{height} image")]
    OutOfBounds {
        row: isize,
        col: isize,
        width: usize,
        height: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value in IRLS iterate at iteration {iteration} (eps = {eps:e})")]
    NonFinite { iteration: usize, eps: f64 },

    #[error("solver failed at pixel ({}, {}): {source}", .pixel.row, .pixel.col)]
    AtPixel {
        pixel: PixelIndex,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed image file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
