//! Periodic graph surfaces `z = f(x, y)` over a rectangular lattice, the
//! builtin catalog, and sampling into triangulated fundamental domains.
//!
//! Builtin height functions are evaluated on the cell phase
//! `(x mod L1) / L1`, so a shift by a full period reproduces the height
//! bit for bit whenever `x + L1` is itself representable.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest vertex count per direction for grid sampling.
pub const MIN_GRID: usize = 3;

/// Relative tolerance on the projected-area tiling check.
pub const TILING_RTOL: f64 = 1e-12;

/// One triangle corner: a stored vertex plus the lattice translate it sits in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, i32, i32)", into = "(usize, i32, i32)")]
pub struct Corner {
    pub vertex: usize,
    pub shift: [i32; 2],
}

impl Corner {
    pub fn new(vertex: usize, m1: i32, m2: i32) -> Self {
        Self {
            vertex,
            shift: [m1, m2],
        }
    }
}

impl From<(usize, i32, i32)> for Corner {
    fn from((vertex, m1, m2): (usize, i32, i32)) -> Self {
        Self::new(vertex, m1, m2)
    }
}

impl From<Corner> for (usize, i32, i32) {
    fn from(c: Corner) -> Self {
        (c.vertex, c.shift[0], c.shift[1])
    }
}

/// Quad splitting pattern for grid sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagonal {
    /// Every quad split along its `(i, j) -> (i+1, j+1)` diagonal.
    #[default]
    Uniform,
    /// Checkerboard of the two diagonal directions.
    Alternating,
}

impl std::str::FromStr for Diagonal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "alternating" => Ok(Self::Alternating),
            other => Err(Error::InvalidParameter {
                name: "diagonal".into(),
                reason: format!("expected `uniform` or `alternating`, got `{other}`"),
            }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// `[n1, n2]` when vertex `i + n1 * j` sits at `(i L1 / n1, j L2 / n2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Diagonal>,
    /// Human-readable notes on sampling counts that were rounded up.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adjustments: Vec<String>,
}

/// Triangulated fundamental domain of a periodic surface on the torus
/// `[0, L1) x [0, L2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicMesh {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[Corner; 3]>,
    #[serde(default)]
    pub metadata: MeshMetadata,
}

impl PeriodicMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Position of a corner, lattice shift included.
    pub fn corner_position(&self, c: Corner) -> [f64; 3] {
        let p = self.vertices[c.vertex];
        [
            p[0] + c.shift[0] as f64 * self.l1,
            p[1] + c.shift[1] as f64 * self.l2,
            p[2],
        ]
    }

    /// Signed area of the triangle projected onto the `xy` plane.
    pub fn projected_area(&self, t: &[Corner; 3]) -> f64 {
        let a = self.corner_position(t[0]);
        let b = self.corner_position(t[1]);
        let c = self.corner_position(t[2]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Checks every structural invariant: indices and shifts in range,
    /// vertices inside the cell, positive projected areas tiling the cell
    /// exactly once, and closed torus topology.
    pub fn validate(&self) -> Result<()> {
        if !(self.l1.is_finite() && self.l1 > 0.0 && self.l2.is_finite() && self.l2 > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "cell periods must be positive and finite, got L1 = {}, L2 = {}",
                self.l1, self.l2
            )));
        }
        if self.vertices.is_empty() || self.triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no vertices or no triangles".into()));
        }
        for (i, p) in self.vertices.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
            }
            if !(0.0..self.l1).contains(&p[0]) || !(0.0..self.l2).contains(&p[1]) {
                return Err(Error::InvalidMesh(format!(
                    "vertex {i} at ({}, {}) lies outside the fundamental cell",
                    p[0], p[1]
                )));
            }
        }
        let mut referenced = vec![false; self.vertices.len()];
        let mut total = 0.0;
        for (index, t) in self.triangles.iter().enumerate() {
            for c in t {
                if c.vertex >= self.vertices.len() {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {index} references missing vertex {}",
                        c.vertex
                    )));
                }
                if c.shift.iter().any(|m| !(-1..=1).contains(m)) {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {index} has shift {:?} outside [-1, 1]",
                        c.shift
                    )));
                }
                referenced[c.vertex] = true;
            }
            let area = self.projected_area(t);
            if area <= 0.0 {
                return Err(Error::DegenerateTriangle { index, area });
            }
            total += area;
        }
        if let Some(v) = referenced.iter().position(|r| !r) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }
        let cell = self.l1 * self.l2;
        if ((total - cell) / cell).abs() > TILING_RTOL {
            return Err(Error::InvalidMesh(format!(
                "projected triangles cover area {total} instead of L1 L2 = {cell}"
            )));
        }
        let edges = crate::rigidity::collect_edges(self)?;
        let (v, e, f) = (self.vertices.len(), edges.len(), self.triangles.len());
        if v + f != e {
            return Err(Error::InvalidMesh(format!(
                "Euler characteristic V - E + F = {} - {} + {} is not 0",
                v, e, f
            )));
        }
        Ok(())
    }
}

/// Declarative description of a periodic surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum SurfaceSpec {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    /// `heights[i][j]` is the height at `(i L1 / n1, j L2 / n2)`.
    Heightgrid {
        #[serde(rename = "L1")]
        l1: f64,
        #[serde(rename = "L2")]
        l2: f64,
        heights: Vec<Vec<f64>>,
    },
    Mesh(PeriodicMesh),
}

impl SurfaceSpec {
    pub fn builtin(name: &str, params: &[(&str, f64)]) -> Self {
        Self::Builtin {
            name: name.to_owned(),
            params: params.iter().map(|(k, v)| ((*k).to_owned(), *v)).collect(),
        }
    }

    /// Cell periods `(L1, L2)` of the described surface.
    pub fn periods(&self) -> Result<(f64, f64)> {
        match self {
            Self::Builtin { name, params } => {
                let s = BuiltinSurface::from_params(name, params)?;
                Ok((s.l1, s.l2))
            }
            Self::Heightgrid { l1, l2, .. } => Ok((*l1, *l2)),
            Self::Mesh(m) => Ok((m.l1, m.l2)),
        }
    }
}

/// Builtin surface families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    Plane,
    /// `A cos(2 pi k x / L1)`.
    Sine1d { amplitude: f64, waves: u32 },
    /// Triangle wave in `x` with peaks at `x = m L1 / k`.
    TriangleWave1d { amplitude: f64, waves: u32 },
    /// Cosine in `x` plus triangle wave in `y`.
    SumSep {
        amplitude_x: f64,
        waves_x: u32,
        amplitude_y: f64,
        waves_y: u32,
    },
    /// `A sin(2 pi kx x / L1) sin(2 pi ky y / L2)`.
    EggboxSmooth {
        amplitude: f64,
        waves_x: u32,
        waves_y: u32,
    },
    /// Miura ori with four parallelogram panels per cell. Folds parallel to
    /// `y` zigzag by `tan(zigzag_angle) L2 / 2` in `x`; alternate fold lines
    /// sit at heights `0` and `height`.
    Miura { height: f64, zigzag_angle: f64 },
}

/// A builtin family with resolved parameters and cell periods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuiltinSurface {
    pub kind: Builtin,
    pub l1: f64,
    pub l2: f64,
}

struct Params<'a> {
    surface: &'a str,
    values: &'a BTreeMap<String, f64>,
    used: BTreeSet<&'static str>,
}

impl<'a> Params<'a> {
    fn new(surface: &'a str, values: &'a BTreeMap<String, f64>) -> Self {
        Self {
            surface,
            values,
            used: BTreeSet::new(),
        }
    }

    fn real(&mut self, name: &'static str, default: f64) -> Result<f64> {
        self.used.insert(name);
        let v = self.values.get(name).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: name.into(),
                reason: format!("must be finite, got {v}"),
            });
        }
        Ok(v)
    }

    fn length(&mut self, name: &'static str, default: f64) -> Result<f64> {
        let v = self.real(name, default)?;
        if v <= 0.0 {
            return Err(Error::InvalidParameter {
                name: name.into(),
                reason: format!("must be positive, got {v}"),
            });
        }
        Ok(v)
    }

    fn count(&mut self, name: &'static str, default: u32) -> Result<u32> {
        let v = self.real(name, default as f64)?;
        if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::InvalidParameter {
                name: name.into(),
                reason: format!("must be an integer >= 1, got {v}"),
            });
        }
        Ok(v as u32)
    }

    fn finish(self) -> Result<()> {
        match self.values.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(Error::UnknownParameter {
                surface: self.surface.into(),
                name: k.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn cosine_profile(amplitude: f64, waves: u32, phase: f64) -> f64 {
    amplitude * (TAU * waves as f64 * phase).cos()
}

/// Triangle wave with value `+A` at phase 0 and `-A` at half period.
fn triangle_profile(amplitude: f64, waves: u32, phase: f64) -> f64 {
    let u = (waves as f64 * phase).fract();
    if u < 0.5 {
        amplitude * (1.0 - 4.0 * u)
    } else {
        amplitude * (4.0 * u - 3.0)
    }
}

impl BuiltinSurface {
    pub fn from_params(name: &str, values: &BTreeMap<String, f64>) -> Result<Self> {
        let mut p = Params::new(name, values);
        let l1 = p.length("L1", TAU)?;
        let l2 = p.length("L2", TAU)?;
        let kind = match name {
            "plane" => Builtin::Plane,
            "sine1d" => Builtin::Sine1d {
                amplitude: p.real("amplitude", 1.0)?,
                waves: p.count("waves", 1)?,
            },
            "trianglewave1d" => Builtin::TriangleWave1d {
                amplitude: p.real("amplitude", 1.0)?,
                waves: p.count("waves", 1)?,
            },
            "sumsep" => Builtin::SumSep {
                amplitude_x: p.real("amplitude_x", 1.0)?,
                waves_x: p.count("waves_x", 1)?,
                amplitude_y: p.real("amplitude_y", 0.5)?,
                waves_y: p.count("waves_y", 1)?,
            },
            "eggbox_smooth" => Builtin::EggboxSmooth {
                amplitude: p.real("amplitude", 1.0)?,
                waves_x: p.count("waves_x", 1)?,
                waves_y: p.count("waves_y", 1)?,
            },
            "miura" => {
                let height = p.real("height", 1.0)?;
                let zigzag_angle = p.real("zigzag_angle", 0.4)?;
                if !(0.0..std::f64::consts::FRAC_PI_2).contains(&zigzag_angle)
                    || 0.5 * l2 * zigzag_angle.tan() >= 0.5 * l1
                {
                    return Err(Error::InvalidParameter {
                        name: "zigzag_angle".into(),
                        reason: format!(
                            "need 0 <= angle < pi/2 with zigzag offset below L1/2, got {zigzag_angle}"
                        ),
                    });
                }
                Builtin::Miura {
                    height,
                    zigzag_angle,
                }
            }
            other => return Err(Error::UnknownSurface(other.into())),
        };
        p.finish()?;
        Ok(Self { kind, l1, l2 })
    }

    /// Explicit parameter map including defaults, suitable for listing.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.insert("L1".to_owned(), self.l1);
        out.insert("L2".to_owned(), self.l2);
        let mut put = |k: &str, v: f64| {
            out.insert(k.to_owned(), v);
        };
        match self.kind {
            Builtin::Plane => {}
            Builtin::Sine1d { amplitude, waves } | Builtin::TriangleWave1d { amplitude, waves } => {
                put("amplitude", amplitude);
                put("waves", waves as f64);
            }
            Builtin::SumSep {
                amplitude_x,
                waves_x,
                amplitude_y,
                waves_y,
            } => {
                put("amplitude_x", amplitude_x);
                put("waves_x", waves_x as f64);
                put("amplitude_y", amplitude_y);
                put("waves_y", waves_y as f64);
            }
            Builtin::EggboxSmooth {
                amplitude,
                waves_x,
                waves_y,
            } => {
                put("amplitude", amplitude);
                put("waves_x", waves_x as f64);
                put("waves_y", waves_y as f64);
            }
            Builtin::Miura {
                height,
                zigzag_angle,
            } => {
                put("height", height);
                put("zigzag_angle", zigzag_angle);
            }
        }
        out
    }

    /// In-plane zigzag offset of the Miura fold lines.
    fn miura_offset(&self, zigzag_angle: f64) -> f64 {
        0.5 * self.l2 * zigzag_angle.tan()
    }

    /// Height at cell phase `(tx, ty)`, both in `[0, 1]`.
    pub fn height_at_phase(&self, tx: f64, ty: f64) -> f64 {
        match self.kind {
            Builtin::Plane => 0.0,
            Builtin::Sine1d { amplitude, waves } => cosine_profile(amplitude, waves, tx),
            Builtin::TriangleWave1d { amplitude, waves } => triangle_profile(amplitude, waves, tx),
            Builtin::SumSep {
                amplitude_x,
                waves_x,
                amplitude_y,
                waves_y,
            } => cosine_profile(amplitude_x, waves_x, tx) + triangle_profile(amplitude_y, waves_y, ty),
            Builtin::EggboxSmooth {
                amplitude,
                waves_x,
                waves_y,
            } => {
                amplitude
                    * (TAU * waves_x as f64 * tx).sin()
                    * (TAU * waves_y as f64 * ty).sin()
            }
            Builtin::Miura {
                height,
                zigzag_angle,
            } => {
                let half_x = 0.5 * self.l1;
                let half_y = 0.5 * self.l2;
                let delta = self.miura_offset(zigzag_angle);
                let x = tx * self.l1;
                let y = ty * self.l2;
                let s = (y / half_y).fract();
                let row = (y / half_y).floor() as i64;
                let offset = if row % 2 == 0 {
                    delta * s
                } else {
                    delta * (1.0 - s)
                };
                // fold line `i` sits at `i * L1/2 + offset`, height alternating 0, H
                let i = ((x - offset) / half_x).floor();
                let start = i * half_x + offset;
                let z_of = |k: f64| if (k as i64).rem_euclid(2) == 0 { 0.0 } else { height };
                let (z0, z1) = (z_of(i), z_of(i + 1.0));
                z0 + (z1 - z0) * (x - start) / half_x
            }
        }
    }

    /// Grid multiples `(k1, k2)` that place every kink on a grid line.
    fn kink_multiples(&self) -> (usize, usize) {
        match self.kind {
            Builtin::TriangleWave1d { waves, .. } => (2 * waves as usize, 1),
            Builtin::SumSep { waves_y, .. } => (1, 2 * waves_y as usize),
            _ => (1, 1),
        }
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.height_at_phase(x.rem_euclid(self.l1) / self.l1, y.rem_euclid(self.l2) / self.l2)
    }
}

fn check_heightgrid(l1: f64, l2: f64, heights: &[Vec<f64>]) -> Result<(usize, usize)> {
    for (name, v) in [("L1", l1), ("L2", l2)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter {
                name: name.into(),
                reason: format!("must be positive and finite, got {v}"),
            });
        }
    }
    let n1 = heights.len();
    let n2 = heights.first().map_or(0, Vec::len);
    if n1 < MIN_GRID || n2 < MIN_GRID {
        return Err(Error::GridTooSmall {
            n: n1.min(n2),
            min: MIN_GRID,
        });
    }
    if heights.iter().any(|row| row.len() != n2) {
        return Err(Error::InvalidParameter {
            name: "heights".into(),
            reason: "rows have differing lengths".into(),
        });
    }
    if heights.iter().flatten().any(|h| !h.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "heights".into(),
            reason: "contains non-finite values".into(),
        });
    }
    Ok((n1, n2))
}

fn bilinear(heights: &[Vec<f64>], tx: f64, ty: f64) -> f64 {
    let (n1, n2) = (heights.len(), heights[0].len());
    let u = tx * n1 as f64;
    let v = ty * n2 as f64;
    let (fu, fv) = (u.floor(), v.floor());
    let (wx, wy) = (u - fu, v - fv);
    let i0 = (fu as i64).rem_euclid(n1 as i64) as usize;
    let j0 = (fv as i64).rem_euclid(n2 as i64) as usize;
    let (i1, j1) = ((i0 + 1) % n1, (j0 + 1) % n2);
    (1.0 - wx) * (1.0 - wy) * heights[i0][j0]
        + wx * (1.0 - wy) * heights[i1][j0]
        + (1.0 - wx) * wy * heights[i0][j1]
        + wx * wy * heights[i1][j1]
}

/// Height of an analytic surface (builtin or heightgrid) at `(x, y)`.
pub fn evaluate(spec: &SurfaceSpec, x: f64, y: f64) -> Result<f64> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "point".into(),
            reason: format!("({x}, {y}) is not finite"),
        });
    }
    match spec {
        SurfaceSpec::Builtin { name, params } => {
            Ok(BuiltinSurface::from_params(name, params)?.evaluate(x, y))
        }
        SurfaceSpec::Heightgrid { l1, l2, heights } => {
            check_heightgrid(*l1, *l2, heights)?;
            Ok(bilinear(heights, x.rem_euclid(*l1) / l1, y.rem_euclid(*l2) / l2))
        }
        SurfaceSpec::Mesh(_) => Err(Error::InvalidParameter {
            name: "variant".into(),
            reason: "explicit meshes carry no analytic height function".into(),
        }),
    }
}

/// Samples with uniform diagonals.
pub fn sample(spec: &SurfaceSpec, n1: usize, n2: usize) -> Result<PeriodicMesh> {
    sample_with(spec, n1, n2, Diagonal::Uniform)
}

/// Samples a surface into a triangulated fundamental domain.
///
/// Grid surfaces need `n1, n2 >= 3`; counts that would cut a triangle-wave
/// kink are rounded up and the change is recorded in the mesh metadata.
/// The Miura builtin emits `floor(n/2)` copies of its natural
/// 4-vertex cell per direction (so `n = 2` is the natural cell) and its cell
/// periods scale accordingly. Explicit meshes are validated and returned
/// unchanged.
pub fn sample_with(
    spec: &SurfaceSpec,
    n1: usize,
    n2: usize,
    diagonal: Diagonal,
) -> Result<PeriodicMesh> {
    match spec {
        SurfaceSpec::Builtin { name, params } => {
            let surface = BuiltinSurface::from_params(name, params)?;
            if let Builtin::Miura {
                height,
                zigzag_angle,
            } = surface.kind
            {
                return miura_mesh(&surface, height, zigzag_angle, n1, n2, diagonal);
            }
            check_grid(n1, n2)?;
            let (k1, k2) = surface.kink_multiples();
            let mut adjustments = Vec::new();
            let m1 = round_up(n1, k1, "n1", &mut adjustments);
            let m2 = round_up(n2, k2, "n2", &mut adjustments);
            let metadata = MeshMetadata {
                source: Some(format!("builtin:{name}")),
                grid: Some([m1, m2]),
                diagonal: Some(diagonal),
                adjustments,
            };
            grid_mesh(surface.l1, surface.l2, m1, m2, diagonal, metadata, |i, j| {
                surface.height_at_phase(i as f64 / m1 as f64, j as f64 / m2 as f64)
            })
        }
        SurfaceSpec::Heightgrid { l1, l2, heights } => {
            check_grid(n1, n2)?;
            let dims = check_heightgrid(*l1, *l2, heights)?;
            let metadata = MeshMetadata {
                source: Some("heightgrid".into()),
                grid: Some([n1, n2]),
                diagonal: Some(diagonal),
                adjustments: Vec::new(),
            };
            grid_mesh(*l1, *l2, n1, n2, diagonal, metadata, |i, j| {
                if dims == (n1, n2) {
                    heights[i][j]
                } else {
                    bilinear(heights, i as f64 / n1 as f64, j as f64 / n2 as f64)
                }
            })
        }
        SurfaceSpec::Mesh(mesh) => {
            mesh.validate()?;
            Ok(mesh.clone())
        }
    }
}

fn check_grid(n1: usize, n2: usize) -> Result<()> {
    for n in [n1, n2] {
        if n < MIN_GRID {
            return Err(Error::GridTooSmall { n, min: MIN_GRID });
        }
    }
    Ok(())
}

fn round_up(n: usize, multiple: usize, label: &str, notes: &mut Vec<String>) -> usize {
    let m = n.div_ceil(multiple) * multiple;
    if m != n {
        notes.push(format!(
            "{label} raised from {n} to {m} so kinks fall on grid lines"
        ));
    }
    m
}

/// Triangulates an `n1 x n2` periodic vertex grid; vertex `(i, j)` has
/// index `i + n1 * j`.
fn grid_mesh(
    l1: f64,
    l2: f64,
    n1: usize,
    n2: usize,
    diagonal: Diagonal,
    metadata: MeshMetadata,
    height: impl Fn(usize, usize) -> f64,
) -> Result<PeriodicMesh> {
    let mut vertices = Vec::with_capacity(n1 * n2);
    for j in 0..n2 {
        for i in 0..n1 {
            vertices.push([
                i as f64 * l1 / n1 as f64,
                j as f64 * l2 / n2 as f64,
                height(i, j),
            ]);
        }
    }
    let triangles = quad_triangles(n1, n2, diagonal, |i, j| i % n1 + n1 * (j % n2));
    let mesh = PeriodicMesh {
        l1,
        l2,
        vertices,
        triangles,
        metadata,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Two CCW triangles per cell of an `n1 x n2` periodic quad grid.
fn quad_triangles(
    n1: usize,
    n2: usize,
    diagonal: Diagonal,
    index: impl Fn(usize, usize) -> usize,
) -> Vec<[Corner; 3]> {
    let corner = |i: usize, j: usize| Corner::new(index(i, j), (i / n1) as i32, (j / n2) as i32);
    let mut triangles = Vec::with_capacity(2 * n1 * n2);
    for j in 0..n2 {
        for i in 0..n1 {
            let a = corner(i, j);
            let b = corner(i + 1, j);
            let c = corner(i + 1, j + 1);
            let d = corner(i, j + 1);
            if diagonal == Diagonal::Alternating && (i + j) % 2 == 1 {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            } else {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
    }
    triangles
}

fn miura_mesh(
    surface: &BuiltinSurface,
    height: f64,
    zigzag_angle: f64,
    n1: usize,
    n2: usize,
    diagonal: Diagonal,
) -> Result<PeriodicMesh> {
    for n in [n1, n2] {
        if n < 2 {
            return Err(Error::GridTooSmall { n, min: 2 });
        }
    }
    let (r1, r2) = (n1 / 2, n2 / 2);
    let mut adjustments = Vec::new();
    for (label, n, r) in [("n1", n1, r1), ("n2", n2, r2)] {
        if n != 2 * r {
            adjustments.push(format!(
                "{label} lowered from {n} to {} (Miura cells carry 2 vertices per direction)",
                2 * r
            ));
        }
    }
    let (c1, c2) = (2 * r1, 2 * r2);
    let half_x = 0.5 * surface.l1;
    let half_y = 0.5 * surface.l2;
    let delta = surface.miura_offset(zigzag_angle);
    let mut vertices = Vec::with_capacity(c1 * c2);
    for j in 0..c2 {
        for i in 0..c1 {
            vertices.push([
                i as f64 * half_x + if j % 2 == 1 { delta } else { 0.0 },
                j as f64 * half_y,
                if i % 2 == 1 { height } else { 0.0 },
            ]);
        }
    }
    let triangles = quad_triangles(c1, c2, diagonal, |i, j| i % c1 + c1 * (j % c2));
    let mesh = PeriodicMesh {
        l1: r1 as f64 * surface.l1,
        l2: r2 as f64 * surface.l2,
        vertices,
        triangles,
        metadata: MeshMetadata {
            source: Some("builtin:miura".into()),
            grid: None,
            diagonal: Some(diagonal),
            adjustments,
        },
    };
    mesh.validate()?;
    Ok(mesh)
}

/// A named surface preset.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: SurfaceSpec,
}

fn preset(name: &'static str, description: &'static str, builtin: &str, overrides: &[(&str, f64)]) -> CatalogEntry {
    let given: BTreeMap<String, f64> = overrides.iter().map(|(k, v)| ((*k).to_owned(), *v)).collect();
    let params = BuiltinSurface::from_params(builtin, &given)
        .expect("catalog presets are valid")
        .params();
    CatalogEntry {
        name,
        description,
        spec: SurfaceSpec::Builtin {
            name: builtin.to_owned(),
            params,
        },
    }
}

/// Builtin presets. Smooth presets use `L1 = L2 = 2 pi`; the `sumsep_r*`
/// variants stretch the cell in `y`.
pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        preset("plane", "flat sheet z = 0", "plane", &[]),
        preset("sine1d", "simple corrugation z = cos(x)", "sine1d", &[]),
        preset("trianglewave1d", "creased corrugation, triangle wave in x", "trianglewave1d", &[]),
        preset("sumsep", "z = cos(x) + triangle(y)", "sumsep", &[]),
        preset("sumsep_r2", "sumsep with L2 = 2 L1", "sumsep", &[("L2", 2.0 * TAU)]),
        preset("sumsep_r4", "sumsep with L2 = 4 L1", "sumsep", &[("L2", 4.0 * TAU)]),
        preset("eggbox_smooth", "z = sin(x) sin(y)", "eggbox_smooth", &[]),
        preset("miura", "Miura ori, four parallelogram panels per cell", "miura", &[]),
    ]
}

/// Looks up a catalog preset by name.
pub fn lookup(name: &str) -> Option<SurfaceSpec> {
    catalog().into_iter().find(|e| e.name == name).map(|e| e.spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(name: &str) -> SurfaceSpec {
        lookup(name).unwrap()
    }

    #[test]
    fn plane_is_flat() {
        let s = spec("plane");
        assert_eq!(evaluate(&s, 0.3, -7.0).unwrap(), 0.0);
    }

    #[test]
    fn sine1d_is_cosine() {
        let s = spec("sine1d");
        assert_eq!(evaluate(&s, 0.0, 1.234).unwrap(), 1.0);
        assert!((evaluate(&s, PI, 0.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sumsep_sums_profiles() {
        let s = spec("sumsep");
        // triangle peak at y = 0; cosine trough at x = pi
        let z = evaluate(&s, PI, 0.0).unwrap();
        assert!((z - (-1.0 + 0.5)).abs() < 1e-15);
        let z = evaluate(&s, 0.0, PI).unwrap();
        assert!((z - (1.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn plane_sample_counts() {
        let m = sample(&spec("plane"), 4, 4).unwrap();
        assert_eq!(m.vertex_count(), 16);
        assert_eq!(m.triangle_count(), 32);
        let area: f64 = m.triangles.iter().map(|t| m.projected_area(t)).sum();
        assert!((area - m.l1 * m.l2).abs() < 1e-12 * m.l1 * m.l2);
    }

    #[test]
    fn sine1d_sample_is_y_independent() {
        let m = sample(&spec("sine1d"), 16, 8).unwrap();
        for j in 0..8 {
            for i in 0..16 {
                let z = m.vertices[i + 16 * j][2];
                assert!(z.abs() <= 1.0);
                assert_eq!(z, m.vertices[i][2]);
            }
        }
    }

    #[test]
    fn triangle_kinks_snap_to_grid() {
        let m = sample(&spec("trianglewave1d"), 7, 5).unwrap();
        assert_eq!(m.metadata.grid, Some([8, 5]));
        assert_eq!(m.metadata.adjustments.len(), 1);
        let m = sample(&spec("sumsep"), 6, 5).unwrap();
        assert_eq!(m.metadata.grid, Some([6, 6]));
    }

    #[test]
    fn alternating_diagonals_tile() {
        for name in ["sumsep", "eggbox_smooth", "miura"] {
            let m = sample_with(&spec(name), 8, 8, Diagonal::Alternating).unwrap();
            assert_eq!(m.metadata.diagonal, Some(Diagonal::Alternating));
            m.validate().unwrap();
        }
    }

    #[test]
    fn miura_natural_cell() {
        let m = sample(&spec("miura"), 2, 2).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.triangle_count(), 8);
        // mesh heights agree with the analytic piecewise-linear evaluation
        let s = spec("miura");
        for t in &m.triangles {
            let c: Vec<_> = t.iter().map(|c| m.corner_position(*c)).collect();
            let cx = (c[0][0] + c[1][0] + c[2][0]) / 3.0;
            let cy = (c[0][1] + c[1][1] + c[2][1]) / 3.0;
            let cz = (c[0][2] + c[1][2] + c[2][2]) / 3.0;
            assert!((evaluate(&s, cx, cy).unwrap() - cz).abs() < 1e-12);
        }
    }

    #[test]
    fn miura_panels_are_developable() {
        // sector angles around every vertex of the folded cell sum to 2 pi
        let m = sample(&spec("miura"), 2, 2).unwrap();
        let s = BuiltinSurface::from_params("miura", &BTreeMap::new()).unwrap();
        let mut sums = vec![0.0; m.vertex_count()];
        let (hx, hy) = (0.5 * s.l1, 0.5 * s.l2);
        let delta = s.miura_offset(0.4);
        // panels are the quads of the 2x2 vertex grid
        for j in 0..2 {
            for i in 0..2 {
                let p = |ii: usize, jj: usize| {
                    let off = if jj % 2 == 1 { delta } else { 0.0 };
                    [ii as f64 * hx + off, jj as f64 * hy, if ii % 2 == 1 { 1.0 } else { 0.0 }]
                };
                let q = [p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)];
                let ids = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                for k in 0..4 {
                    let (a, b, c) = (q[k], q[(k + 1) % 4], q[(k + 3) % 4]);
                    let u: Vec<f64> = (0..3).map(|d| b[d] - a[d]).collect();
                    let v: Vec<f64> = (0..3).map(|d| c[d] - a[d]).collect();
                    let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
                    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let (ii, jj) = ids[k];
                    sums[ii % 2 + 2 * (jj % 2)] += (dot / (nu * nv)).acos();
                }
            }
        }
        for s in sums {
            assert!((s - TAU).abs() < 1e-12, "angle sum {s}");
        }
    }

    #[test]
    fn catalog_contents() {
        let names: Vec<_> = catalog().iter().map(|e| e.name).collect();
        for n in ["plane", "sine1d", "trianglewave1d", "sumsep", "eggbox_smooth", "miura"] {
            assert!(names.contains(&n), "{n}");
        }
    }

    #[test]
    fn grid_too_small() {
        assert!(matches!(
            sample(&spec("plane"), 2, 4),
            Err(Error::GridTooSmall { n: 2, .. })
        ));
    }

    #[test]
    fn parameter_errors() {
        let bad = SurfaceSpec::builtin("sine1d", &[("waves", 1.5)]);
        assert!(matches!(sample(&bad, 8, 8), Err(Error::InvalidParameter { .. })));
        let bad = SurfaceSpec::builtin("sine1d", &[("amplitude", f64::NAN)]);
        assert!(evaluate(&bad, 0.0, 0.0).is_err());
        let bad = SurfaceSpec::builtin("sine1d", &[("wave", 2.0)]);
        assert!(matches!(evaluate(&bad, 0.0, 0.0), Err(Error::UnknownParameter { .. })));
        let bad = SurfaceSpec::builtin("torus", &[]);
        assert!(matches!(evaluate(&bad, 0.0, 0.0), Err(Error::UnknownSurface(_))));
    }

    #[test]
    fn degenerate_triangle_is_error() {
        let mut m = sample(&spec("plane"), 4, 4).unwrap();
        m.triangles[0].swap(1, 2);
        assert!(matches!(m.validate(), Err(Error::DegenerateTriangle { index: 0, .. })));
    }

    #[test]
    fn heightgrid_roundtrip_through_sampling() {
        let m = sample(&spec("eggbox_smooth"), 6, 5).unwrap();
        let heights: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..5).map(|j| m.vertices[i + 6 * j][2]).collect())
            .collect();
        let hg = SurfaceSpec::Heightgrid {
            l1: m.l1,
            l2: m.l2,
            heights,
        };
        let m2 = sample(&hg, 6, 5).unwrap();
        assert_eq!(m.vertices, m2.vertices);
        assert_eq!(m.triangles, m2.triangles);
        // bilinear interpolation reproduces grid values
        let z = evaluate(&hg, m.l1 * 2.0 / 6.0, m.l2 * 3.0 / 5.0).unwrap();
        assert!((z - m.vertices[2 + 6 * 3][2]).abs() < 1e-12);
    }

    #[test]
    fn spec_json_variants() {
        let json = r#"{"variant":"builtin","name":"sine1d","params":{"amplitude":0.5}}"#;
        let s: SurfaceSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s, SurfaceSpec::builtin("sine1d", &[("amplitude", 0.5)]));
        let m = sample(&spec("plane"), 3, 3).unwrap();
        let json = serde_json::to_string(&SurfaceSpec::Mesh(m.clone())).unwrap();
        assert!(json.contains(r#""variant":"mesh""#));
        let back: SurfaceSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SurfaceSpec::Mesh(m));
    }
}
