//! Finite-difference geometry of periodic graphs, used as a smooth-side
//! check on discrete deflection fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface_gen::{PeriodicMesh, MIN_GRID};

/// Samples of a scalar on the periodic grid `(i L1 / n1, j L2 / n2)`,
/// stored with `i` fastest: `values[i + n1 * j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicField {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(l1: f64, l2: f64, n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        let f = Self {
            l1,
            l2,
            n1,
            n2,
            values,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn from_fn(l1: f64, l2: f64, n1: usize, n2: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n1 * n2);
        for j in 0..n2 {
            for i in 0..n1 {
                values.push(f(i as f64 * l1 / n1 as f64, j as f64 * l2 / n2 as f64));
            }
        }
        Self::new(l1, l2, n1, n2, values)
    }

    /// Vertex heights of a grid-sampled mesh.
    pub fn heights_of(mesh: &PeriodicMesh) -> Result<Self> {
        let [n1, n2] = grid_of(mesh)?;
        Self::new(mesh.l1, mesh.l2, n1, n2, mesh.vertices.iter().map(|p| p[2]).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.n1 < MIN_GRID || self.n2 < MIN_GRID {
            return Err(Error::GridTooSmall {
                n: self.n1.min(self.n2),
                min: MIN_GRID,
            });
        }
        if self.values.len() != self.n1 * self.n2 {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                self.values.len(),
                self.n1,
                self.n2
            )));
        }
        if !(self.l1 > 0.0 && self.l2 > 0.0) || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "field".into(),
                reason: "periods must be positive and values finite".into(),
            });
        }
        Ok(())
    }

    pub fn at(&self, i: isize, j: isize) -> f64 {
        let i = i.rem_euclid(self.n1 as isize) as usize;
        let j = j.rem_euclid(self.n2 as isize) as usize;
        self.values[i + self.n1 * j]
    }

    fn map(&self, f: impl Fn(isize, isize) -> f64) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.n2 as isize {
            for i in 0..self.n1 as isize {
                values.push(f(i, j));
            }
        }
        Self {
            values,
            ..self.clone()
        }
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.n1 != other.n1 || self.n2 != other.n2 || self.l1 != other.l1 || self.l2 != other.l2 {
            return Err(Error::GridMismatch(format!(
                "{}x{} on {}x{} vs {}x{} on {}x{}",
                self.n1, self.n2, self.l1, self.l2, other.n1, other.n2, other.l1, other.l2
            )));
        }
        Ok(())
    }

    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Grid dimensions recorded on a mesh, or an error if it is not a plain
/// vertex grid.
pub fn grid_of(mesh: &PeriodicMesh) -> Result<[usize; 2]> {
    match mesh.metadata.grid {
        Some([n1, n2]) if n1 * n2 == mesh.vertex_count() => Ok([n1, n2]),
        Some(_) => Err(Error::NotGridSampled("grid metadata does not match the vertex count".into())),
        None => Err(Error::NotGridSampled(
            mesh.metadata.source.clone().unwrap_or_else(|| "explicit mesh".into()),
        )),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub dx: PeriodicField,
    pub dy: PeriodicField,
    pub dxx: PeriodicField,
    pub dyy: PeriodicField,
    pub dxy: PeriodicField,
}

/// Second-order central differences with periodic wraparound.
pub fn fd_derivatives(f: &PeriodicField) -> Derivatives {
    let hx = f.l1 / f.n1 as f64;
    let hy = f.l2 / f.n2 as f64;
    Derivatives {
        dx: f.map(|i, j| (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * hx)),
        dy: f.map(|i, j| (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * hy)),
        dxx: f.map(|i, j| (f.at(i + 1, j) - 2.0 * f.at(i, j) + f.at(i - 1, j)) / (hx * hx)),
        dyy: f.map(|i, j| (f.at(i, j + 1) - 2.0 * f.at(i, j) + f.at(i, j - 1)) / (hy * hy)),
        dxy: f.map(|i, j| {
            (f.at(i + 1, j + 1) - f.at(i + 1, j - 1) - f.at(i - 1, j + 1) + f.at(i - 1, j - 1))
                / (4.0 * hx * hy)
        }),
    }
}

/// Denominator of the graph curvature formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureDenominator {
    /// `(1 + |grad f|^2)^2`, the Gauss curvature of a graph.
    #[default]
    Standard,
    /// `sqrt(1 + |grad f|^2)`, an alternative exponent kept for comparison.
    SquareRoot,
}

impl CurvatureDenominator {
    pub fn eval(self, grad2: f64) -> f64 {
        match self {
            Self::Standard => (1.0 + grad2).powi(2),
            Self::SquareRoot => (1.0 + grad2).sqrt(),
        }
    }
}

/// `K = (f_xx f_yy - f_xy^2) / D` pointwise.
pub fn gauss_curvature_graph(f: &PeriodicField, denominator: CurvatureDenominator) -> PeriodicField {
    let d = fd_derivatives(f);
    let values = (0..f.values.len())
        .map(|k| {
            let num = d.dxx.values[k] * d.dyy.values[k] - d.dxy.values[k].powi(2);
            let g2 = d.dx.values[k].powi(2) + d.dy.values[k].powi(2);
            num / denominator.eval(g2)
        })
        .collect();
    PeriodicField {
        values,
        ..f.clone()
    }
}

/// Residual of the linearized Gauss-invariance equation
/// `f_yy w_xx - 2 f_xy w_xy + f_xx w_yy` for `w = periodic + Q`, where the
/// quadratic `Q` with coefficients `chi = (chi11, chi22, chi12)` is
/// differentiated exactly. Returns the field and its RMS.
pub fn linearized_gauss_residual(
    f: &PeriodicField,
    w_periodic: &PeriodicField,
    chi: [f64; 3],
) -> Result<(PeriodicField, f64)> {
    f.same_grid(w_periodic)?;
    let df = fd_derivatives(f);
    let dw = fd_derivatives(w_periodic);
    let values = (0..f.values.len())
        .map(|k| {
            let wxx = dw.dxx.values[k] + chi[0];
            let wyy = dw.dyy.values[k] + chi[1];
            let wxy = dw.dxy.values[k] + chi[2];
            df.dyy.values[k] * wxx - 2.0 * df.dxy.values[k] * wxy + df.dxx.values[k] * wyy
        })
        .collect();
    let field = PeriodicField {
        values,
        ..f.clone()
    };
    let rms = field.rms();
    Ok((field, rms))
}
