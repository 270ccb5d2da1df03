//! Right null space of the constraint matrix.
//!
//! Small systems use a dense thin SVD. Large ones use block inverse
//! iteration on `C^T C + mu I`, applied through a sparse QR of the stacked
//! matrix `[C; sqrt(mu) I]` so the normal matrix is never formed. The shift
//! `sqrt(mu) = rank_tol * sigma_max` sits at the rank threshold, so kernel
//! directions are amplified by `(sigma^2 + mu) / mu` over every direction
//! above it. Rank decisions are made by a Rayleigh-Ritz step on `C` itself.

use faer::linalg::solvers::SolveLstsq;
use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigidity::ConstraintSystem;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Ratio of the smallest non-kernel Ritz value to the rank threshold above
/// which one inverse-iteration step is trusted.
const SEPARATION: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    Dense,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelOptions {
    pub rank_tol: f64,
    /// Largest unknown count handled by the dense SVD.
    pub dense_limit: usize,
    pub block: usize,
    pub max_block: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            dense_limit: 1200,
            block: 48,
            max_block: 512,
            max_iterations: 12,
            seed: 0x5eed,
        }
    }
}

/// Orthonormal kernel basis, one column per vector.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub basis: Mat<f64>,
    pub sigma_max: f64,
    pub method: KernelMethod,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.basis.col(j).iter().copied().collect()
    }
}

pub fn kernel(system: &ConstraintSystem, rank_tol: f64) -> Result<Kernel> {
    kernel_with(
        system,
        &KernelOptions {
            rank_tol,
            ..Default::default()
        },
    )
}

fn check_tol(rank_tol: f64) -> Result<()> {
    if !(rank_tol > 0.0 && rank_tol <= 1e-4) {
        return Err(Error::InvalidParameter {
            name: "rank_tol".into(),
            reason: format!("must lie in (0, 1e-4], got {rank_tol}"),
        });
    }
    Ok(())
}

pub fn kernel_with(system: &ConstraintSystem, opts: &KernelOptions) -> Result<Kernel> {
    check_tol(opts.rank_tol)?;
    if system.ncols() <= opts.dense_limit {
        dense_kernel(system, opts.rank_tol)
    } else {
        iterative_kernel(system, opts)
    }
}

pub fn dense_kernel(system: &ConstraintSystem, rank_tol: f64) -> Result<Kernel> {
    check_tol(rank_tol)?;
    let n = system.ncols();
    let c = system.matrix.to_dense(n);
    let svd = c
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("dense SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let sigma_max = s[0];
    let cut = rank_tol * sigma_max;
    let keep: Vec<usize> = (0..n).filter(|&i| s[i] <= cut).collect();
    let v = svd.V();
    let basis = Mat::from_fn(n, keep.len(), |i, j| v[(i, keep[j])]);
    Ok(Kernel {
        basis,
        sigma_max,
        method: KernelMethod::Dense,
    })
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Mat<f64> {
    Mat::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0))
}

fn sparse_mul(system: &ConstraintSystem, x: MatRef<'_, f64>) -> Mat<f64> {
    let a = &system.matrix;
    let mut out = Mat::zeros(a.nrows, x.ncols());
    for j in 0..x.ncols() {
        let col = x.col(j);
        for r in 0..a.nrows {
            out[(r, j)] = a.row(r).map(|(c, v)| v * col[c]).sum();
        }
    }
    out
}

/// Largest singular value by power iteration on `C^T C`.
pub fn sigma_max(system: &ConstraintSystem, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = system.ncols();
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = system.matrix.mul_transpose_vec(&system.matrix.mul_vec(&v));
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let done = (norm - lambda).abs() <= 1e-12 * norm;
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if done {
            break;
        }
    }
    lambda.sqrt()
}

/// Removes the span of `locked` from `x` twice (classical Gram-Schmidt with
/// reorthogonalization), then orthonormalizes the columns.
fn orthonormalize(x: Mat<f64>, locked: &Mat<f64>) -> Mat<f64> {
    let mut x = x;
    if locked.ncols() > 0 {
        for _ in 0..2 {
            let proj = locked.transpose() * &x;
            x -= locked * &proj;
        }
    }
    x.qr().compute_thin_Q()
}

fn append_columns(a: &Mat<f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let k = a.ncols();
    Mat::from_fn(a.nrows(), k + b.ncols(), |i, j| if j < k { a[(i, j)] } else { b[(i, j - k)] })
}

pub fn iterative_kernel(system: &ConstraintSystem, opts: &KernelOptions) -> Result<Kernel> {
    check_tol(opts.rank_tol)?;
    let (m, n) = (system.nrows(), system.ncols());
    let sigma_max = sigma_max(system, opts.seed);
    let cut = opts.rank_tol * sigma_max;
    let shift = cut;

    let mut triplets = Vec::with_capacity(system.matrix.nnz() + n);
    for r in 0..m {
        for (c, v) in system.matrix.row(r) {
            triplets.push(faer::sparse::Triplet::new(r, c, v));
        }
    }
    for i in 0..n {
        triplets.push(faer::sparse::Triplet::new(m + i, i, shift));
    }
    let stacked = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(m + n, n, &triplets)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let qr = stacked
        .sp_qr()
        .map_err(|e| Error::Linalg(format!("sparse QR failed: {e:?}")))?;
    // (C^T C + mu I)^{-1} x as the least-squares solution with rhs [0; x / sqrt(mu)]
    let apply = |x: &Mat<f64>| -> Mat<f64> {
        let mut rhs = Mat::zeros(m + n, x.ncols());
        for j in 0..x.ncols() {
            for i in 0..n {
                rhs[(m + i, j)] = x[(i, j)] / shift;
            }
        }
        let sol = qr.solve_lstsq(&rhs);
        sol.subrows(0, n).to_owned()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked = Mat::<f64>::zeros(n, 0);
    let mut block = opts.block.max(4);
    let mut history = Vec::new();
    let mut total_iterations = 0;
    loop {
        let b = block.min(n - locked.ncols());
        if b == 0 {
            break;
        }
        let mut x = orthonormalize(random_block(&mut rng, n, b), &locked);
        let mut previous = usize::MAX;
        let mut settled = None;
        for it in 0..opts.max_iterations {
            total_iterations += 1;
            x = orthonormalize(apply(&x), &locked);
            let cx = sparse_mul(system, x.as_ref());
            let svd = cx
                .thin_svd()
                .map_err(|e| Error::Linalg(format!("Ritz SVD failed: {e:?}")))?;
            let s = svd.S().column_vector();
            let count = (0..b).filter(|&i| s[i] <= cut).count();
            // smallest Ritz value above the threshold tracks the separation
            let gap = (0..b).filter(|&i| s[i] > cut).map(|i| s[i]).fold(f64::INFINITY, f64::min);
            history.push(if gap.is_finite() { gap / sigma_max } else { 0.0 });
            let ritz = &x * svd.V();
            x = ritz;
            // a full block is all kernel; otherwise accept once the first
            // non-kernel Ritz value is well separated or the count is stable
            if count == b || gap > SEPARATION * cut || (it >= 1 && count == previous) {
                settled = Some(count);
                break;
            }
            previous = count;
        }
        let Some(count) = settled else {
            return Err(Error::KernelNotConverged {
                iterations: total_iterations,
                history,
            });
        };
        // singular values come out descending, so the kernel Ritz vectors are last
        let kept = x.subcols(b - count, count);
        locked = append_columns(&locked, kept);
        if count < b {
            break;
        }
        block = (4 * block).min(opts.max_block);
    }
    Ok(Kernel {
        basis: locked,
        sigma_max,
        method: KernelMethod::Iterative,
    })
}

/// Cosines of the principal angles between two orthonormal bases, ascending.
pub fn principal_cosines(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Ok(Vec::new());
    }
    let m = a.transpose() * b;
    let s = m
        .singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let mut s: Vec<f64> = s.into_iter().map(|v| v.min(1.0)).collect();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Largest principal angle between the spans, or `pi/2` if dimensions differ.
///
/// Computed as the sine of the angle, `||(I - A A^T) B||_2`, which stays
/// accurate for nearly coincident subspaces where `acos` of the cosines
/// cannot resolve angles below about `1e-8`.
pub fn subspace_distance(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    if a.ncols() == 0 {
        return Ok(0.0);
    }
    let proj = a.transpose() * b;
    let r = b - a * &proj;
    let s = r
        .singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0).min(1.0).asin())
}
