//! Macroscopic data of kernel vectors and their splitting into effective
//! flexure modes, effective membrane modes and local mechanisms.
//!
//! Scales: for a unit kernel vector the curvature map is measured as
//! `chi * Lmax^2` and the strain map as `E / Lmax^2`, both dimensionless,
//! and compared against `tol_macro`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::kernel::{Kernel, KernelMethod};
use crate::rigidity::{AnsatzLayout, ConstraintSystem, CHI11, CHI12, CHI22};
use crate::surface_gen::PeriodicMesh;

pub const DEFAULT_TOL_MACRO: f64 = 1e-8;

/// Relative size below which a principal component is treated as zero
/// when forming Poisson ratios.
pub const POISSON_TOL: f64 = 1e-6;

/// Frobenius norm of a symmetric 2x2 tensor stored as `(a11, a22, a12)`.
pub fn sym_norm(t: [f64; 3]) -> f64 {
    (t[0] * t[0] + t[1] * t[1] + 2.0 * t[2] * t[2]).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroData {
    /// `(E11, E22, E12)` from the cell-outline deflections, length^2.
    pub e: [f64; 3],
    /// `E_ab / (L_a L_b)`, dimensionless.
    pub e_bar: [f64; 3],
    /// `(chi11, chi22, chi12)`, 1/length.
    pub chi: [f64; 3],
    pub pdot1: [f64; 3],
    pub pdot2: [f64; 3],
}

/// Macro quantities of an ansatz vector. The cell outline is anchored at
/// vertex 0, whose height enters through the in-plane drift of the bent
/// reference plane.
pub fn extract_macro(mode: &[f64], mesh: &PeriodicMesh) -> MacroData {
    let layout = AnsatzLayout::new(mesh.vertex_count());
    let g = layout.g_block(mode);
    let chi = layout.chi_block(mode);
    let h = [[chi[CHI11], chi[CHI12]], [chi[CHI12], chi[CHI22]]];
    let [x0, y0, z0] = mesh.vertices[0];
    let (l1, l2) = (mesh.l1, mesh.l2);
    let pdot = |p: [f64; 2]| -> [f64; 3] {
        let hp = [h[0][0] * p[0] + h[0][1] * p[1], h[1][0] * p[0] + h[1][1] * p[1]];
        let quad = x0 * hp[0] + y0 * hp[1] + 0.5 * (p[0] * hp[0] + p[1] * hp[1]);
        [
            g[0][0] * p[0] + g[0][1] * p[1] - z0 * hp[0],
            g[1][0] * p[0] + g[1][1] * p[1] - z0 * hp[1],
            g[2][0] * p[0] + g[2][1] * p[1] + quad,
        ]
    };
    let pdot1 = pdot([l1, 0.0]);
    let pdot2 = pdot([0.0, l2]);
    let e = [
        l1 * pdot1[0],
        l2 * pdot2[1],
        0.5 * (l1 * pdot2[0] + l2 * pdot1[1]),
    ];
    let e_bar = [e[0] / (l1 * l1), e[1] / (l2 * l2), e[2] / (l1 * l2)];
    MacroData {
        e,
        e_bar,
        chi,
        pdot1,
        pdot2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Flexure,
    Membrane,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsometricMode {
    pub id: usize,
    pub kind: ModeKind,
    /// Flexure mode whose outline also strains.
    pub mixed: bool,
    pub vector: Vec<f64>,
    pub macro_data: MacroData,
    /// `||C_edges v|| / (sigma_max ||v||)`.
    pub edge_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    pub kernel_dim: usize,
    pub sigma_max: f64,
    pub method: KernelMethod,
    pub tol_macro: f64,
    /// Flexure modes first, then membrane modes.
    pub modes: Vec<IsometricMode>,
    /// Reduced-echelon basis of the achievable curvatures.
    pub curvature_set: Vec<[f64; 3]>,
    /// Reduced-echelon basis of the achievable normalized strains.
    pub strain_set: Vec<[f64; 3]>,
    pub local_mechanisms: usize,
}

impl ModeSet {
    pub fn flexure(&self) -> impl Iterator<Item = &IsometricMode> {
        self.modes.iter().filter(|m| m.kind == ModeKind::Flexure)
    }

    pub fn membrane(&self) -> impl Iterator<Item = &IsometricMode> {
        self.modes.iter().filter(|m| m.kind == ModeKind::Membrane)
    }

    pub fn mode(&self, id: usize) -> Result<&IsometricMode> {
        self.modes.get(id).ok_or(Error::UnknownMode(id))
    }
}

/// Singular triplets of a small dense matrix, sorted by descending value.
/// Goes through faer: nalgebra's SVD loses accuracy on some of these wide
/// rank-deficient maps.
fn sorted_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let m = faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("SVD failed: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector().iter().copied().collect();
    Ok((
        DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        s,
        DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    ))
}

/// Reduced row echelon form of the rows of `basis` (each a 3-vector),
/// with unit pivots.
fn rref(mut rows: Vec<[f64; 3]>) -> Vec<[f64; 3]> {
    let mut lead = 0;
    let r = rows.len();
    for col in 0..3 {
        if lead == r {
            break;
        }
        let piv = (lead..r)
            .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()))
            .unwrap();
        if rows[piv][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(lead, piv);
        let p = rows[lead][col];
        for v in rows[lead].iter_mut() {
            *v /= p;
        }
        rows[lead][col] = 1.0;
        for i in 0..r {
            if i != lead {
                let f = rows[i][col];
                for k in 0..3 {
                    rows[i][k] -= f * rows[lead][k];
                }
                rows[i][col] = 0.0;
            }
        }
        lead += 1;
    }
    rows
}

/// Minimum-norm coefficients `c` with `a c = target`, using the rank-`r`
/// part of a sorted SVD.
fn min_norm(u: &DMatrix<f64>, s: &[f64], v: &DMatrix<f64>, r: usize, target: [f64; 3]) -> DVector<f64> {
    let t = DVector::from_row_slice(&target);
    let mut c = DVector::zeros(v.nrows());
    for i in 0..r {
        let w = u.column(i).dot(&t) / s[i];
        c += v.column(i) * w;
    }
    c
}

fn combine(kernel: &Kernel, c: &DVector<f64>) -> Vec<f64> {
    let n = kernel.basis.nrows();
    let mut out = vec![0.0; n];
    for (j, &cj) in c.iter().enumerate() {
        if cj != 0.0 {
            let col = kernel.basis.col(j);
            for (o, x) in out.iter_mut().zip(col.iter()) {
                *o += cj * x;
            }
        }
    }
    out
}

/// Splits the kernel into flexure and membrane modes.
///
/// Flexure modes realize a reduced-echelon basis of the curvature image
/// with minimum-norm kernel vectors. Membrane modes do the same for the
/// normalized-strain image of the curvature-free subspace. Whatever is
/// left carries neither and is counted as local mechanisms.
pub fn classify(
    kernel: &Kernel,
    system: &ConstraintSystem,
    mesh: &PeriodicMesh,
    tol_macro: f64,
) -> Result<ModeSet> {
    if !(tol_macro > 0.0 && tol_macro.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tol_macro".into(),
            reason: format!("must be positive, got {tol_macro}"),
        });
    }
    let k = kernel.dim();
    let mut set = ModeSet {
        kernel_dim: k,
        sigma_max: kernel.sigma_max,
        method: kernel.method,
        tol_macro,
        modes: Vec::new(),
        curvature_set: Vec::new(),
        strain_set: Vec::new(),
        local_mechanisms: 0,
    };
    if k == 0 {
        return Ok(set);
    }
    let (l1, l2) = (mesh.l1, mesh.l2);
    let lmax2 = l1.max(l2).powi(2);
    let strain_scale = [l1 * l1 / lmax2, l2 * l2 / lmax2, l1 * l2 / lmax2];
    let mut chi_map = DMatrix::zeros(3, k);
    let mut e_map = DMatrix::zeros(3, k);
    for j in 0..k {
        let m = extract_macro(&kernel.vector(j), mesh);
        for i in 0..3 {
            chi_map[(i, j)] = m.chi[i] * lmax2;
            e_map[(i, j)] = m.e_bar[i] * strain_scale[i];
        }
    }

    let (u, s, v) = sorted_svd(&chi_map)?;
    let r = s.iter().take_while(|&&x| x > tol_macro).count();
    let image: Vec<[f64; 3]> = (0..r).map(|i| [u[(0, i)], u[(1, i)], u[(2, i)]]).collect();
    set.curvature_set = rref(image);
    let mut vectors = Vec::new();
    for t in &set.curvature_set {
        let c = min_norm(&u, &s, &v, r, [t[0] * lmax2, t[1] * lmax2, t[2] * lmax2]);
        vectors.push((ModeKind::Flexure, combine(kernel, &c)));
    }

    // orthonormal basis of the curvature-free coefficient subspace
    let null = if r == 0 {
        DMatrix::identity(k, k)
    } else {
        let vr = faer::Mat::from_fn(k, r, |i, j| v[(i, j)]);
        let q = vr.qr().compute_Q();
        DMatrix::from_fn(k, k - r, |i, j| q[(i, r + j)])
    };
    let k0 = null.ncols();
    let mut r2 = 0;
    if k0 > 0 {
        let e0 = &e_map * &null;
        let (u2, s2, v2) = sorted_svd(&e0)?;
        r2 = s2.iter().take_while(|&&x| x > tol_macro).count();
        let image: Vec<[f64; 3]> = (0..r2)
            .map(|i| {
                // back to normalized-strain coordinates before reducing
                let mut t = [0.0; 3];
                for a in 0..3 {
                    t[a] = u2[(a, i)] / strain_scale[a];
                }
                t
            })
            .collect();
        set.strain_set = rref(image);
        for t in &set.strain_set {
            let scaled = [t[0] * strain_scale[0], t[1] * strain_scale[1], t[2] * strain_scale[2]];
            let c0 = min_norm(&u2, &s2, &v2, r2, scaled);
            vectors.push((ModeKind::Membrane, combine(kernel, &(&null * c0))));
        }
    }
    set.local_mechanisms = k - r - r2;

    for (id, (kind, vector)) in vectors.into_iter().enumerate() {
        let macro_data = extract_macro(&vector, mesh);
        let vnorm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        let res = system.edge_residual(&vector);
        let rnorm = res.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lmax = lmax2.sqrt();
        let mixed = kind == ModeKind::Flexure
            && sym_norm(macro_data.e_bar) > tol_macro * lmax * sym_norm(macro_data.chi);
        set.modes.push(IsometricMode {
            id,
            kind,
            mixed,
            vector,
            macro_data,
            edge_residual: rnorm / (kernel.sigma_max * vnorm),
        });
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Principal {
    /// Rotation angle in `(-pi/4, pi/4]`.
    pub angle: f64,
    pub e: [f64; 3],
    pub chi: [f64; 3],
}

fn rotate(t: [f64; 3], c: f64, s: f64) -> [f64; 3] {
    let [a, b, m] = t;
    [
        c * c * a + 2.0 * c * s * m + s * s * b,
        s * s * a - 2.0 * c * s * m + c * c * b,
        (b - a) * c * s + m * (c * c - s * s),
    ]
}

/// Rotates both tensors into the principal frame of the strain, applying
/// `R^T T R` with `R` the rotation by the returned angle.
pub fn principal_basis(e: [f64; 3], chi: [f64; 3]) -> Result<Principal> {
    let norm = sym_norm(e);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroStrain);
    }
    let d = e[0] - e[1];
    let angle = if d.abs() <= 1e-14 * norm && e[2].abs() <= 1e-14 * norm {
        0.0
    } else if d == 0.0 {
        std::f64::consts::FRAC_PI_4.copysign(e[2])
    } else {
        0.5 * (2.0 * e[2] / d).atan()
    };
    let (s, c) = angle.sin_cos();
    Ok(Principal {
        angle,
        e: rotate(e, c, s),
        chi: rotate(chi, c, s),
    })
}

/// In-plane Poisson coefficient `-E22 / E11`.
pub fn nu_in(e: [f64; 3], tol: f64) -> Result<f64> {
    if e[0].abs() <= tol * sym_norm(e) || e[0] == 0.0 {
        return Err(Error::UndefinedRatio("nu_in"));
    }
    Ok(-e[1] / e[0])
}

/// Out-of-plane Poisson coefficient `-chi22 / chi11`.
pub fn nu_out(chi: [f64; 3], tol: f64) -> Result<f64> {
    if chi[0].abs() <= tol * sym_norm(chi) || chi[0] == 0.0 {
        return Err(Error::UndefinedRatio("nu_out"));
    }
    Ok(-chi[1] / chi[0])
}

pub fn poisson(e: [f64; 3], chi: [f64; 3]) -> Result<(f64, f64)> {
    Ok((nu_in(e, POISSON_TOL)?, nu_out(chi, POISSON_TOL)?))
}
