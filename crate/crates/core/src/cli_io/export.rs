//! Mode files and tiled OBJ exports of deflected surfaces.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{ModeKind, ModeSet};
use crate::rigidity::deflection;
use crate::surface_gen::PeriodicMesh;

pub const MODES_SCHEMA: &str = "isoflex.modes";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredMode {
    pub id: usize,
    pub kind: ModeKind,
    /// Full ansatz vector `(phi, G, chi)`.
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModesFile {
    pub schema: String,
    pub version: u32,
    pub vertices: usize,
    pub modes: Vec<StoredMode>,
}

impl ModesFile {
    pub fn from_set(set: &ModeSet, vertices: usize) -> Self {
        Self {
            schema: MODES_SCHEMA.to_owned(),
            version: super::report::REPORT_VERSION,
            vertices,
            modes: set
                .modes
                .iter()
                .map(|m| StoredMode {
                    id: m.id,
                    kind: m.kind,
                    vector: m.vector.clone(),
                })
                .collect(),
        }
    }

    pub fn mode(&self, id: usize) -> Result<&StoredMode> {
        self.modes.iter().find(|m| m.id == id).ok_or(Error::UnknownMode(id))
    }
}

/// Tiling counts `m1 x m2`, parsed from strings like `4x4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiling(pub [usize; 2]);

impl FromStr for Tiling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter {
            name: "tile".into(),
            reason: format!("expected <m1>x<m2> with both at least 1, got `{s}`"),
        };
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let m1: usize = a.trim().parse().map_err(|_| bad())?;
        let m2: usize = b.trim().parse().map_err(|_| bad())?;
        if m1 == 0 || m2 == 0 {
            return Err(bad());
        }
        Ok(Self([m1, m2]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformRequest {
    pub mode: usize,
    /// Largest `t`; frames sweep `[-t, t]`, a single frame uses `t`.
    pub amplitude: f64,
    pub tile: Tiling,
    pub frames: usize,
}

impl DeformRequest {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidParameter {
                name: "frames".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter {
                name: "amplitude".into(),
                reason: format!("must be finite, got {}", self.amplitude),
            });
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        if self.frames == 1 {
            return vec![self.amplitude];
        }
        let k = (self.frames - 1) as f64;
        (0..self.frames)
            .map(|i| self.amplitude * (2.0 * i as f64 / k - 1.0))
            .collect()
    }
}

pub fn frame_name(k: usize, t: f64) -> String {
    format!("frame_{k:03}_t{t:+.6}.obj")
}

/// Tiled copies of the cell with their deflections. Vertices are the
/// lattice copies `(v, a, b)` referenced by some triangle of the tiling.
#[derive(Clone, Debug, PartialEq)]
pub struct TiledSurface {
    pub positions: Vec<[f64; 3]>,
    pub deflections: Vec<[f64; 3]>,
    /// Zero-based vertex indices.
    pub faces: Vec<[usize; 3]>,
}

impl TiledSurface {
    pub fn new(mesh: &PeriodicMesh, mode: &[f64], tile: Tiling) -> Self {
        let [m1, m2] = tile.0;
        let mut index: HashMap<(usize, i32, i32), usize> = HashMap::new();
        let mut out = Self {
            positions: Vec::new(),
            deflections: Vec::new(),
            faces: Vec::with_capacity(m1 * m2 * mesh.triangle_count()),
        };
        for b in 0..m2 as i32 {
            for a in 0..m1 as i32 {
                for tri in &mesh.triangles {
                    let face = tri.map(|c| {
                        let key = (c.vertex, a + c.shift[0], b + c.shift[1]);
                        *index.entry(key).or_insert_with(|| {
                            let p = mesh.vertices[key.0];
                            let shift = [key.1, key.2];
                            out.positions.push([
                                p[0] + f64::from(shift[0]) * mesh.l1,
                                p[1] + f64::from(shift[1]) * mesh.l2,
                                p[2],
                            ]);
                            out.deflections.push(deflection(mesh, mode, key.0, shift));
                            out.positions.len() - 1
                        })
                    });
                    out.faces.push(face);
                }
            }
        }
        out
    }

    /// `X + t xdot`.
    pub fn at(&self, t: f64) -> Vec<[f64; 3]> {
        self.positions
            .iter()
            .zip(&self.deflections)
            .map(|(x, u)| [x[0] + t * u[0], x[1] + t * u[1], x[2] + t * u[2]])
            .collect()
    }

    pub fn write_obj(&self, t: f64, header: &str, mut out: impl Write) -> Result<()> {
        writeln!(out, "# {header}")?;
        for p in self.at(t) {
            writeln!(out, "v {:?} {:?} {:?}", p[0], p[1], p[2])?;
        }
        for f in &self.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}

/// Writes one OBJ per frame and returns the paths.
pub fn write_frames(mesh: &PeriodicMesh, mode: &StoredMode, req: &DeformRequest, dir: &Path) -> Result<Vec<PathBuf>> {
    req.validate()?;
    if mode.vector.len() != crate::rigidity::AnsatzLayout::new(mesh.vertex_count()).len() {
        return Err(Error::InvalidMesh(format!(
            "mode {} has {} entries, which does not fit a {}-vertex mesh",
            mode.id,
            mode.vector.len(),
            mesh.vertex_count()
        )));
    }
    std::fs::create_dir_all(dir)?;
    let tiled = TiledSurface::new(mesh, &mode.vector, req.tile);
    let mut paths = Vec::with_capacity(req.frames);
    for (k, t) in req.times().into_iter().enumerate() {
        let path = dir.join(frame_name(k, t));
        let header = format!(
            "mode {} t {} tile {}x{}",
            mode.id, t, req.tile.0[0], req.tile.0[1]
        );
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        tiled.write_obj(t, &header, file)?;
        paths.push(path);
    }
    Ok(paths)
}
