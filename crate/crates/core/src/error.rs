use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown builtin surface `{0}`")]
    UnknownSurface(String),

    #[error("surface `{surface}` has no parameter `{name}`")]
    UnknownParameter { surface: String, name: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("grid size {n} is below the minimum of {min}")]
    GridTooSmall { n: usize, min: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("triangle {index} has non-positive projected area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("edge {a}->{b} shift {shift:?} is shared by {count} triangles (expected 2)")]
    NonManifoldEdge {
        a: usize,
        b: usize,
        shift: [i32; 2],
        count: usize,
    },

    #[error("field grids do not match: {0}")]
    GridMismatch(String),

    #[error("iterative kernel solver did not converge after {iterations} iterations (last Ritz residuals: {history:?})")]
    KernelNotConverged { iterations: usize, history: Vec<f64> },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("ratio {0} is undefined (denominator below tolerance)")]
    UndefinedRatio(&'static str),

    #[error("strain is zero; no principal basis")]
    ZeroStrain,

    #[error("unknown mode id {0}")]
    UnknownMode(usize),

    #[error("surface is not grid-sampled: {0}")]
    NotGridSampled(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status: 2 when the numerics break down, 3 for bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::KernelNotConverged { .. } | Self::Linalg(_) | Self::UndefinedRatio(_) | Self::ZeroStrain => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
