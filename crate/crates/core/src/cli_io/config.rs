//! Analysis configuration files and surface resolution.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{DEFAULT_RANK_TOL, DEFAULT_TOL_MACRO};
use crate::surface_gen::{lookup, Diagonal, SurfaceSpec, MIN_GRID};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "ISOFLEX_OUT";

/// Where a surface comes from: a catalog name, a path to a surface JSON
/// file, or an inline surface object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceSource {
    Named(String),
    Inline(SurfaceSpec),
}

impl SurfaceSource {
    /// Catalog names take precedence over file paths. Relative paths are
    /// taken from `base` when given.
    pub fn resolve(&self, base: Option<&Path>) -> Result<SurfaceSpec> {
        match self {
            Self::Inline(spec) => Ok(spec.clone()),
            Self::Named(name) => {
                if let Some(spec) = lookup(name) {
                    return Ok(spec);
                }
                let mut path = PathBuf::from(name);
                if path.is_relative() {
                    if let Some(b) = base {
                        path = b.join(path);
                    }
                }
                if path.is_file() {
                    read_json(&path)
                } else {
                    Err(Error::UnknownSurface(name.clone()))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportToggles {
    /// Mesh JSON that re-ingests to the same analysis.
    pub mesh: bool,
    /// Mode vectors, needed by `deform`.
    pub modes: bool,
    pub pairing_csv: bool,
    /// Constraint matrix as `row col value` triplets.
    pub constraints: bool,
}

impl Default for ExportToggles {
    fn default() -> Self {
        Self {
            mesh: true,
            modes: true,
            pairing_csv: true,
            constraints: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub surface: Option<SurfaceSource>,
    pub n1: usize,
    pub n2: usize,
    pub diagonal: Diagonal,
    pub rank_tol: f64,
    pub tol_macro: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub export: ExportToggles,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            surface: None,
            n1: 16,
            n2: 16,
            diagonal: Diagonal::Uniform,
            rank_tol: DEFAULT_RANK_TOL,
            tol_macro: DEFAULT_TOL_MACRO,
            out: None,
            export: ExportToggles::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.surface.is_none() {
            return Err(invalid("surface", "no surface given"));
        }
        for (name, n) in [("n1", self.n1), ("n2", self.n2)] {
            if n < MIN_GRID {
                return Err(invalid(name, format!("must be at least {MIN_GRID}, got {n}")));
            }
        }
        for (name, t) in [("rank_tol", self.rank_tol), ("tol_macro", self.tol_macro)] {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid(name, format!("must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Output directory: explicit setting, else the environment default.
    pub fn out_dir(&self) -> Result<PathBuf> {
        out_dir_or_env(self.out.as_deref())
    }
}

pub fn out_dir_or_env(out: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = out {
        return Ok(p.to_path_buf());
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
        _ => Err(invalid("out", format!("no output directory (pass --out or set {OUT_ENV})"))),
    }
}

/// File form of the `deform` flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformConfig {
    pub analysis: Option<PathBuf>,
    pub mode: Option<usize>,
    pub amplitude: Option<f64>,
    /// `<m1>x<m2>`.
    pub tile: Option<String>,
    pub frames: Option<usize>,
    pub out: Option<PathBuf>,
}

/// File form of the `pde-check` flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeCheckConfig {
    pub surface: Option<SurfaceSource>,
    /// Mode id or one of `xy`, `x2`, `y2`.
    pub w: Option<String>,
    pub n: Option<usize>,
    pub rank_tol: Option<f64>,
    pub tol_macro: Option<f64>,
}

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_owned(),
        reason: reason.into(),
    }
}

/// Reads JSON, reporting parse errors with line and column.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })
}
