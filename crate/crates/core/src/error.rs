use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("age table line {line}: {msg}")]
    AgeTable { line: usize, msg: String },

    #[error("invalid multi-person unit: {0}")]
    Mpu(String),

    #[error("control file line {line}, field {field}: {msg}")]
    Control {
        line: usize,
        field: usize,
        msg: String,
    },

    #[error("stage {t}: value at bucket {bucket} ({value:e}) breaks monotonicity or bounds (previous {previous:e}, ceiling {ceiling:e})")]
    InvalidStage {
        t: usize,
        bucket: usize,
        value: f64,
        previous: f64,
        ceiling: f64,
    },

    #[error("malformed {what} at line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("Yule-Walker system is singular at lag {lag}")]
    SingularToeplitz { lag: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}
