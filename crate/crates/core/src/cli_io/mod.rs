//! Command drivers behind the `isoflex` binary: configuration, report
//! files and mesh exports.

pub mod config;
pub mod export;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{AnalysisConfig, DeformConfig, ExportToggles, PdeCheckConfig, SurfaceSource, OUT_ENV};
pub use export::{DeformRequest, ModesFile, StoredMode, TiledSurface, Tiling};
pub use report::{Report, Settings, REPORT_SCHEMA, REPORT_VERSION};

use crate::diffgeo::{linearized_gauss_residual, PeriodicField};
use crate::error::{Error, Result};
use crate::modes::{analyze_modes, KernelOptions, ModeSet};
use crate::rigidity::{AnsatzLayout, ConstraintSystem};
use crate::surface_gen::{catalog, sample_with, Diagonal, PeriodicMesh, SurfaceSpec, MIN_GRID};

pub const REPORT_FILE: &str = "report.json";
pub const MESH_FILE: &str = "mesh.json";
pub const MODES_FILE: &str = "modes.json";
pub const CONFIG_FILE: &str = "config.json";
pub const PAIRING_FILE: &str = "pairing.csv";
pub const CONSTRAINTS_FILE: &str = "constraints.txt";

/// Pretty JSON plus a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Everything one analysis produces, before anything touches the disk.
pub struct Analysis {
    pub spec: SurfaceSpec,
    pub mesh: PeriodicMesh,
    pub system: ConstraintSystem,
    pub modes: ModeSet,
    pub report: Report,
}

/// Runs sampling, assembly, kernel, classification and the checks.
/// `base` anchors relative surface paths.
pub fn run_analysis(config: &AnalysisConfig, base: Option<&Path>) -> Result<Analysis> {
    config.validate()?;
    let spec = config
        .surface
        .as_ref()
        .ok_or_else(|| config::invalid("surface", "no surface given"))?
        .resolve(base)?;
    let mesh = sample_with(&spec, config.n1, config.n2, config.diagonal)?;
    let opts = KernelOptions {
        rank_tol: config.rank_tol,
        ..Default::default()
    };
    let (system, modes) = analyze_modes(&mesh, &opts, config.tol_macro)?;
    let settings = Settings {
        rank_tol: config.rank_tol,
        tol_macro: config.tol_macro,
    };
    let report = report::build(&mesh, &system, &modes, settings)?;
    Ok(Analysis {
        spec,
        mesh,
        system,
        modes,
        report,
    })
}

/// `analyze`: writes the report and the enabled exports into `out`.
pub fn cmd_analyze(config: &AnalysisConfig, base: Option<&Path>, out: &Path) -> Result<Analysis> {
    let a = run_analysis(config, base)?;
    fs::create_dir_all(out)?;
    write_json(&out.join(REPORT_FILE), &a.report)?;
    // the resolved config re-runs this analysis from anywhere
    let exported = AnalysisConfig {
        surface: Some(SurfaceSource::Inline(a.spec.clone())),
        out: None,
        ..config.clone()
    };
    write_json(&out.join(CONFIG_FILE), &exported)?;
    if config.export.mesh {
        write_json(&out.join(MESH_FILE), &SurfaceSpec::Mesh(a.mesh.clone()))?;
    }
    if config.export.modes {
        write_json(&out.join(MODES_FILE), &ModesFile::from_set(&a.modes, a.mesh.vertex_count()))?;
    }
    if config.export.pairing_csv {
        let f = fs::File::create(out.join(PAIRING_FILE))?;
        report::write_pairing_csv(&a.report.reciprocity, f)?;
    }
    if config.export.constraints {
        let f = std::io::BufWriter::new(fs::File::create(out.join(CONSTRAINTS_FILE))?);
        a.system.write_triplets(f)?;
    }
    Ok(a)
}

/// Mesh and modes of an analysis directory.
pub fn load_analysis(dir: &Path) -> Result<(PeriodicMesh, ModesFile)> {
    let mesh = match config::read_json::<SurfaceSpec>(&dir.join(MESH_FILE))? {
        SurfaceSpec::Mesh(m) => m,
        _ => {
            return Err(Error::Config {
                path: dir.join(MESH_FILE),
                message: "expected an explicit mesh".into(),
            })
        }
    };
    mesh.validate()?;
    let modes: ModesFile = config::read_json(&dir.join(MODES_FILE))?;
    if modes.vertices != mesh.vertex_count() {
        return Err(Error::Config {
            path: dir.join(MODES_FILE),
            message: format!(
                "modes were computed on {} vertices, mesh has {}",
                modes.vertices,
                mesh.vertex_count()
            ),
        });
    }
    Ok((mesh, modes))
}

/// `deform`: OBJ frames of the tiled, deflected surface.
pub fn cmd_deform(analysis: &Path, req: &DeformRequest, out: &Path) -> Result<Vec<PathBuf>> {
    let (mesh, modes) = load_analysis(analysis)?;
    let mode = modes.mode(req.mode)?;
    export::write_frames(&mesh, mode, req, out)
}

/// Deflection tested by `pde-check`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WField {
    /// Vertical part of a computed mode.
    Mode(usize),
    /// `w = x y`.
    Xy,
    /// `w = x^2 / 2`.
    X2,
    /// `w = y^2 / 2`.
    Y2,
}

impl WField {
    fn chi(self) -> Option<[f64; 3]> {
        match self {
            Self::Xy => Some([0.0, 0.0, 1.0]),
            Self::X2 => Some([1.0, 0.0, 0.0]),
            Self::Y2 => Some([0.0, 1.0, 0.0]),
            Self::Mode(_) => None,
        }
    }
}

impl FromStr for WField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy" => Ok(Self::Xy),
            "x2" => Ok(Self::X2),
            "y2" => Ok(Self::Y2),
            _ => s.parse().map(Self::Mode).map_err(|_| Error::InvalidParameter {
                name: "w".into(),
                reason: format!("expected a mode id, xy, x2 or y2, got `{s}`"),
            }),
        }
    }
}

impl std::fmt::Display for WField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Mode(id) => write!(f, "mode {id}"),
            Self::Xy => f.write_str("xy"),
            Self::X2 => f.write_str("x^2/2"),
            Self::Y2 => f.write_str("y^2/2"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeLevel {
    pub n: usize,
    pub rms: f64,
    pub max_abs: f64,
    pub chi: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeCheckReport {
    pub source: Option<String>,
    pub w: WField,
    pub levels: Vec<PdeLevel>,
    /// `log(rms_coarse / rms_fine) / log(n_fine / n_coarse)`, when both
    /// residuals are nonzero.
    pub observed_order: Option<f64>,
}

/// Grids used by `pde-check`: `n, 2n` for analytic fields and `n/2, n`
/// for computed modes, which need a kernel solve per level.
pub fn pde_levels(w: WField, n: usize) -> Vec<usize> {
    match w {
        WField::Mode(_) => vec![(n / 2).max(MIN_GRID), n],
        _ => vec![n, 2 * n],
    }
}

/// `pde-check`: linearized Gauss residual of `w` on a grid-sampled surface.
pub fn cmd_pde_check(spec: &SurfaceSpec, w: WField, n: usize, settings: Settings) -> Result<PdeCheckReport> {
    let mut levels = Vec::new();
    let mut source = None;
    for nl in pde_levels(w, n) {
        let mesh = sample_with(spec, nl, nl, Diagonal::Uniform)?;
        let f = PeriodicField::heights_of(&mesh)?;
        source = mesh.metadata.source.clone();
        let (wp, chi) = match w.chi() {
            Some(chi) => (PeriodicField::new(f.l1, f.l2, f.n1, f.n2, vec![0.0; f.values.len()])?, chi),
            None => mode_w(&mesh, &f, w, settings)?,
        };
        let (field, rms) = linearized_gauss_residual(&f, &wp, chi)?;
        levels.push(PdeLevel {
            n: f.n1,
            rms,
            max_abs: field.max_abs(),
            chi,
        });
    }
    let observed_order = match levels.as_slice() {
        [a, b] if a.rms > 0.0 && b.rms > 0.0 => Some((a.rms / b.rms).ln() / (b.n as f64 / a.n as f64).ln()),
        _ => None,
    };
    Ok(PdeCheckReport {
        source,
        w,
        levels,
        observed_order,
    })
}

/// Periodic vertical part `phi_z` and curvatures of a computed mode. The
/// gauge sets `G31 = G32 = 0`, so nothing linear is dropped.
fn mode_w(mesh: &PeriodicMesh, f: &PeriodicField, w: WField, settings: Settings) -> Result<(PeriodicField, [f64; 3])> {
    let WField::Mode(id) = w else {
        unreachable!("analytic fields carry their own curvature")
    };
    let opts = KernelOptions {
        rank_tol: settings.rank_tol,
        ..Default::default()
    };
    let (_, set) = analyze_modes(mesh, &opts, settings.tol_macro)?;
    let mode = set.mode(id)?;
    let layout = AnsatzLayout::new(mesh.vertex_count());
    let values = (0..mesh.vertex_count()).map(|v| mode.vector[layout.phi(v, 2)]).collect();
    let wp = PeriodicField::new(f.l1, f.l2, f.n1, f.n2, values)?;
    Ok((wp, mode.macro_data.chi))
}

/// `catalog`: one line per preset with its parameters.
pub fn catalog_listing() -> String {
    let mut out = String::new();
    for e in catalog() {
        let params = match &e.spec {
            SurfaceSpec::Builtin { params, .. } => params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" "),
            _ => String::new(),
        };
        out.push_str(&format!("{:<16} {}\n    {}\n", e.name, e.description, params));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w_field_parse() {
        assert_eq!("xy".parse::<WField>().unwrap(), WField::Xy);
        assert_eq!("3".parse::<WField>().unwrap(), WField::Mode(3));
        assert!("z2".parse::<WField>().is_err());
    }

    #[test]
    fn level_choice() {
        assert_eq!(pde_levels(WField::Xy, 16), vec![16, 32]);
        assert_eq!(pde_levels(WField::Mode(0), 16), vec![8, 16]);
        assert_eq!(pde_levels(WField::Mode(0), 4), vec![3, 4]);
    }

    #[test]
    fn listing_names_presets() {
        let s = catalog_listing();
        for name in ["plane", "sumsep", "miura"] {
            assert!(s.contains(name));
        }
    }
}
