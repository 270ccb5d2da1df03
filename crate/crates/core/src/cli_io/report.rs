//! Versioned analysis report, with the invariant checks that decide the
//! exit status.

use serde::{Deserialize, Serialize};

use crate::modes::{KernelMethod, ModeKind, ModeSet};
use crate::reciprocity::{verify, ReciprocityReport, Verdict, POISSON_IDENTITY_TOL, THEOREM_TOL};
use crate::rigidity::{collect_edges, trivial_modes, ConstraintSystem};
use crate::surface_gen::{Diagonal, PeriodicMesh};
use crate::Result;

pub const REPORT_SCHEMA: &str = "isoflex.report";
pub const REPORT_VERSION: u32 = 1;

/// Largest accepted relative edge residual of an exact rigid motion.
pub const TRIVIAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub source: Option<String>,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub grid: Option<[usize; 2]>,
    pub diagonal: Option<Diagonal>,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub adjustments: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub rank_tol: f64,
    pub tol_macro: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSummary {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub edge_rows: usize,
    pub gauge: String,
    /// Max relative edge residual over the six rigid motions.
    pub trivial_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub dimension: usize,
    pub method: KernelMethod,
    pub sigma_max: f64,
    pub flexure: usize,
    pub membrane: usize,
    pub local_mechanisms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub id: usize,
    pub kind: ModeKind,
    pub mixed: bool,
    #[serde(rename = "E")]
    pub e: [f64; 3],
    #[serde(rename = "E_bar")]
    pub e_bar: [f64; 3],
    pub chi: [f64; 3],
    pub pdot1: [f64; 3],
    pub pdot2: [f64; 3],
    pub edge_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: u32,
    pub surface: SurfaceSummary,
    pub settings: Settings,
    pub constraints: ConstraintSummary,
    pub kernel: KernelSummary,
    pub curvature_set: Vec<[f64; 3]>,
    pub strain_set: Vec<[f64; 3]>,
    pub modes: Vec<ModeSummary>,
    pub reciprocity: ReciprocityReport,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// `max_t ||C_e t||_inf / (||C_e||_inf ||t||_inf)` over the rigid motions.
pub fn trivial_residual(system: &ConstraintSystem, mesh: &PeriodicMesh) -> f64 {
    let scale = system.edge_norm_inf();
    trivial_modes(mesh)
        .iter()
        .map(|t| {
            let r = system.edge_residual(t).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let tn = t.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            r / (scale * tn)
        })
        .fold(0.0, f64::max)
}

fn check(name: &str, value: f64, bound: Bound, limit: f64) -> Check {
    let passed = match bound {
        Bound::Max => value <= limit,
        Bound::Min => value >= limit,
    };
    Check {
        name: name.to_owned(),
        passed,
        value,
        bound,
        limit,
    }
}

pub fn build(mesh: &PeriodicMesh, system: &ConstraintSystem, set: &ModeSet, settings: Settings) -> Result<Report> {
    let edges = collect_edges(mesh)?.len();
    let reciprocity = verify(set);
    let trivial = trivial_residual(system, mesh);
    let modes: Vec<_> = set
        .modes
        .iter()
        .map(|m| ModeSummary {
            id: m.id,
            kind: m.kind,
            mixed: m.mixed,
            e: m.macro_data.e,
            e_bar: m.macro_data.e_bar,
            chi: m.macro_data.chi,
            pdot1: m.macro_data.pdot1,
            pdot2: m.macro_data.pdot2,
            edge_residual: m.edge_residual,
        })
        .collect();

    let mut checks = vec![
        check("trivial_modes", trivial, Bound::Max, TRIVIAL_TOL),
        check("kernel_dimension", set.kernel_dim as f64, Bound::Min, 3.0),
        check(
            "mode_residuals",
            modes.iter().map(|m| m.edge_residual).fold(0.0, f64::max),
            Bound::Max,
            10.0 * settings.rank_tol,
        ),
    ];
    let best = match reciprocity.verdict {
        Verdict::Vacuous => 0.0,
        _ => reciprocity.max_raw_residual.min(reciprocity.max_normalized_residual),
    };
    checks.push(check("reciprocity", best, Bound::Max, THEOREM_TOL));
    if let Some(d) = reciprocity.max_poisson_defect() {
        checks.push(check("poisson_identity", d, Bound::Max, POISSON_IDENTITY_TOL));
    }
    let passed = checks.iter().all(|c| c.passed);

    Ok(Report {
        schema: REPORT_SCHEMA.to_owned(),
        version: REPORT_VERSION,
        surface: SurfaceSummary {
            source: mesh.metadata.source.clone(),
            l1: mesh.l1,
            l2: mesh.l2,
            grid: mesh.metadata.grid,
            diagonal: mesh.metadata.diagonal,
            vertices: mesh.vertex_count(),
            edges,
            triangles: mesh.triangle_count(),
            adjustments: mesh.metadata.adjustments.clone(),
        },
        settings,
        constraints: ConstraintSummary {
            rows: system.nrows(),
            cols: system.ncols(),
            nnz: system.matrix.nnz(),
            edge_rows: system.n_edges,
            gauge: system.gauge.to_owned(),
            trivial_residual: trivial,
        },
        kernel: KernelSummary {
            dimension: set.kernel_dim,
            method: set.method,
            sigma_max: set.sigma_max,
            flexure: set.flexure().count(),
            membrane: set.membrane().count(),
            local_mechanisms: set.local_mechanisms,
        },
        curvature_set: set.curvature_set.clone(),
        strain_set: set.strain_set.clone(),
        modes,
        reciprocity,
        checks,
        passed,
    })
}

const PAIRING_COLUMNS: [&str; 6] = [
    "membrane",
    "flexure",
    "raw",
    "raw_residual",
    "normalized",
    "normalized_residual",
];

/// Pairing table as CSV, header only when there are no pairs.
pub fn write_pairing_csv(report: &ReciprocityReport, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if report.pairs.is_empty() {
        w.write_record(PAIRING_COLUMNS)?;
    }
    for p in &report.pairs {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
