//! First-order edge-length preservation over the quasi-periodic ansatz.
//!
//! A deflection is parametrized per vertex `v` at in-plane position `xi`
//! (lattice shift included) and height `z` as
//!
//! ```text
//! xdot = phi_v + G xi + e3 Q(xi) - z (H xi, 0),   Q(xi) = xi^T H xi / 2,
//! ```
//!
//! with `H = [[chi11, chi12], [chi12, chi22]]`. The last term is the
//! in-plane drift that accompanies a bent reference plane; without it the
//! quadratic part would not be translation invariant and the edge rows
//! would depend on where an edge sits in the cell. With it, the `chi`
//! coefficients of an edge with in-plane vector `d` and mean height `zbar`
//! reduce to `-zbar (dx^2, dy^2, 2 dx dy)`.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::surface_gen::PeriodicMesh;

/// Index map of the unknown vector `[phi (3N), G (6), chi (3)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnsatzLayout {
    pub n_vertices: usize,
}

pub const CHI11: usize = 0;
pub const CHI22: usize = 1;
pub const CHI12: usize = 2;

impl AnsatzLayout {
    pub fn new(n_vertices: usize) -> Self {
        Self { n_vertices }
    }

    pub fn len(&self) -> usize {
        3 * self.n_vertices + 9
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Component `c` of the deflection of vertex `v`.
    pub fn phi(&self, v: usize, c: usize) -> usize {
        3 * v + c
    }

    /// Entry `G[row][col]`, row in `(u, v, w)`, column in `(x, y)`.
    pub fn g(&self, row: usize, col: usize) -> usize {
        3 * self.n_vertices + 2 * row + col
    }

    /// Curvature coefficient, one of [`CHI11`], [`CHI22`], [`CHI12`].
    pub fn chi(&self, k: usize) -> usize {
        3 * self.n_vertices + 6 + k
    }

    pub fn g_block(&self, x: &[f64]) -> [[f64; 2]; 3] {
        let o = 3 * self.n_vertices;
        [[x[o], x[o + 1]], [x[o + 2], x[o + 3]], [x[o + 4], x[o + 5]]]
    }

    pub fn chi_block(&self, x: &[f64]) -> [f64; 3] {
        let o = 3 * self.n_vertices + 6;
        [x[o], x[o + 1], x[o + 2]]
    }
}

/// A unique mesh edge from vertex `a` to the `shift` translate of `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub shift: [i32; 2],
    pub vector: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSet {
    pub edges: Vec<Edge>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn canonical(a: usize, b: usize, s: [i32; 2]) -> (usize, usize, [i32; 2]) {
    let flipped = (b, a, [-s[0], -s[1]]);
    (a, b, s).min(flipped)
}

/// Unique edges of the mesh in canonical orientation, sorted by key.
pub fn collect_edges(mesh: &PeriodicMesh) -> Result<EdgeSet> {
    let mut counts: BTreeMap<(usize, usize, [i32; 2]), usize> = BTreeMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (p, q) = (t[k], t[(k + 1) % 3]);
            let s = [q.shift[0] - p.shift[0], q.shift[1] - p.shift[1]];
            if p.vertex == q.vertex && s == [0, 0] {
                return Err(Error::InvalidMesh(format!(
                    "triangle side collapses onto vertex {}",
                    p.vertex
                )));
            }
            *counts.entry(canonical(p.vertex, q.vertex, s)).or_default() += 1;
        }
    }
    let mut edges = Vec::with_capacity(counts.len());
    for ((a, b, shift), count) in counts {
        if count != 2 {
            return Err(Error::NonManifoldEdge { a, b, shift, count });
        }
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let vector = [
            pb[0] + shift[0] as f64 * mesh.l1 - pa[0],
            pb[1] + shift[1] as f64 * mesh.l2 - pa[1],
            pb[2] - pa[2],
        ];
        edges.push(Edge { a, b, shift, vector });
    }
    if 2 * edges.len() != 3 * mesh.triangles.len() {
        return Err(Error::InvalidMesh(format!(
            "{} edges for {} triangles",
            edges.len(),
            mesh.triangles.len()
        )));
    }
    Ok(EdgeSet { edges })
}

/// Compressed sparse rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    fn with_cols(ncols: usize) -> Self {
        Self {
            nrows: 0,
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Appends a row, merging duplicate columns and sorting by column.
    fn push_row(&mut self, mut entries: Vec<(usize, f64)>) {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        for (c, v) in merged {
            if v != 0.0 {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
        self.nrows += 1;
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row_dot(r, x)).collect()
    }

    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
        out
    }

    /// Matrix infinity norm restricted to the first `rows` rows.
    pub fn norm_inf_rows(&self, rows: usize) -> f64 {
        (0..rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_faer_sparse(&self) -> Result<faer::sparse::SparseColMat<usize, f64>> {
        let triplets: Vec<_> = (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| faer::sparse::Triplet::new(r, c, v)))
            .collect();
        faer::sparse::SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| Error::Linalg(format!("{e:?}")))
    }

    /// Dense copy padded with zero rows up to `min_rows`.
    pub fn to_dense(&self, min_rows: usize) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.nrows.max(min_rows), self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

pub const GAUGE_DESCRIPTION: &str =
    "mean-zero phi (3 rows), G31 = 0, G32 = 0, G12 = G21; rows unit-normalized";

/// Edge rows followed by six gauge rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSystem {
    pub layout: AnsatzLayout,
    pub n_edges: usize,
    pub matrix: CsrMatrix,
    pub l1: f64,
    pub l2: f64,
    pub gauge: &'static str,
}

impl ConstraintSystem {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols
    }

    /// `C_edges x`.
    pub fn edge_residual(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_edges).map(|r| self.matrix.row_dot(r, x)).collect()
    }

    pub fn gauge_residual(&self, x: &[f64]) -> [f64; 6] {
        let mut g = [0.0; 6];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = self.matrix.row_dot(self.n_edges + k, x);
        }
        g
    }

    pub fn edge_norm_inf(&self) -> f64 {
        self.matrix.norm_inf_rows(self.n_edges)
    }

    /// Writes `row col value` lines, zero-based, one nonzero per line.
    pub fn write_triplets(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "% {} {} {}", self.nrows(), self.ncols(), self.matrix.nnz())?;
        for r in 0..self.nrows() {
            for (c, v) in self.matrix.row(r) {
                writeln!(out, "{r} {c} {v:e}")?;
            }
        }
        Ok(())
    }
}

/// Builds the constraint system. Edge rows are divided by the edge length.
pub fn assemble(mesh: &PeriodicMesh) -> Result<ConstraintSystem> {
    mesh.validate()?;
    let edges = collect_edges(mesh)?;
    let n = mesh.vertex_count();
    let layout = AnsatzLayout::new(n);
    let mut matrix = CsrMatrix::with_cols(layout.len());
    for edge in &edges.edges {
        let e = edge.vector;
        let len = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        let d = [e[0], e[1]];
        let zbar = 0.5 * (mesh.vertices[edge.a][2] + mesh.vertices[edge.b][2]);
        let mut row = Vec::with_capacity(15);
        for c in 0..3 {
            row.push((layout.phi(edge.b, c), e[c] / len));
            row.push((layout.phi(edge.a, c), -e[c] / len));
            for k in 0..2 {
                row.push((layout.g(c, k), e[c] * d[k] / len));
            }
        }
        row.push((layout.chi(CHI11), -zbar * d[0] * d[0] / len));
        row.push((layout.chi(CHI22), -zbar * d[1] * d[1] / len));
        row.push((layout.chi(CHI12), -2.0 * zbar * d[0] * d[1] / len));
        matrix.push_row(row);
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    for c in 0..3 {
        matrix.push_row((0..n).map(|v| (layout.phi(v, c), inv_sqrt_n)).collect());
    }
    matrix.push_row(vec![(layout.g(2, 0), 1.0)]);
    matrix.push_row(vec![(layout.g(2, 1), 1.0)]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    matrix.push_row(vec![(layout.g(0, 1), h), (layout.g(1, 0), -h)]);
    Ok(ConstraintSystem {
        layout,
        n_edges: edges.len(),
        matrix,
        l1: mesh.l1,
        l2: mesh.l2,
        gauge: GAUGE_DESCRIPTION,
    })
}

/// Translations along `e1, e2, e3` followed by infinitesimal rotations
/// about `e1, e2, e3`.
pub fn trivial_modes(mesh: &PeriodicMesh) -> [Vec<f64>; 6] {
    let layout = AnsatzLayout::new(mesh.vertex_count());
    let mut modes: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; layout.len()]);
    for (t, mode) in modes.iter_mut().take(3).enumerate() {
        for v in 0..mesh.vertex_count() {
            mode[layout.phi(v, t)] = 1.0;
        }
    }
    for r in 0..3 {
        let mut axis = [0.0; 3];
        axis[r] = 1.0;
        let mode = &mut modes[3 + r];
        for (v, p) in mesh.vertices.iter().enumerate() {
            let w = cross(axis, [0.0, 0.0, p[2]]);
            for c in 0..3 {
                mode[layout.phi(v, c)] = w[c];
            }
        }
        for k in 0..2 {
            let mut ek = [0.0; 3];
            ek[k] = 1.0;
            let col = cross(axis, ek);
            for c in 0..3 {
                mode[layout.g(c, k)] = col[c];
            }
        }
    }
    modes
}

/// Deflection of the lattice copy `shift` of vertex `v` under an ansatz
/// vector: `phi_v + G xi + e3 Q(xi) - z (H xi, 0)` with `xi` the shifted
/// in-plane position.
pub fn deflection(mesh: &PeriodicMesh, x: &[f64], v: usize, shift: [i32; 2]) -> [f64; 3] {
    let layout = AnsatzLayout::new(mesh.vertex_count());
    let g = layout.g_block(x);
    let chi = layout.chi_block(x);
    let p = mesh.vertices[v];
    let xi = [
        p[0] + f64::from(shift[0]) * mesh.l1,
        p[1] + f64::from(shift[1]) * mesh.l2,
    ];
    let hxi = [
        chi[CHI11] * xi[0] + chi[CHI12] * xi[1],
        chi[CHI12] * xi[0] + chi[CHI22] * xi[1],
    ];
    let q = 0.5 * (xi[0] * hxi[0] + xi[1] * hxi[1]);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = x[layout.phi(v, c)] + g[c][0] * xi[0] + g[c][1] * xi[1];
    }
    out[0] -= p[2] * hxi[0];
    out[1] -= p[2] * hxi[1];
    out[2] += q;
    out
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Adds the rigid motion that brings `x` back into the gauge.
pub fn regauge(system: &ConstraintSystem, mesh: &PeriodicMesh, x: &[f64]) -> Result<Vec<f64>> {
    let trivial = trivial_modes(mesh);
    let mut m = Matrix6::zeros();
    for (j, t) in trivial.iter().enumerate() {
        let g = system.gauge_residual(t);
        for i in 0..6 {
            m[(i, j)] = g[i];
        }
    }
    let rhs = -Vector6::from_row_slice(&system.gauge_residual(x));
    let c = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Linalg("gauge rows do not fix the rigid motions".into()))?;
    let mut out = x.to_vec();
    for (j, t) in trivial.iter().enumerate() {
        for (o, ti) in out.iter_mut().zip(t) {
            *o += c[j] * ti;
        }
    }
    Ok(out)
}
