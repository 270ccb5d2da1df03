//! Kernel of the constraint system and classification of its vectors.

pub mod classify;
pub mod kernel;

pub use classify::{
    classify, extract_macro, nu_in, nu_out, poisson, principal_basis, sym_norm, IsometricMode,
    MacroData, ModeKind, ModeSet, Principal, DEFAULT_TOL_MACRO, POISSON_TOL,
};
pub use kernel::{kernel, kernel_with, Kernel, KernelMethod, KernelOptions, DEFAULT_RANK_TOL};

use crate::error::Result;
use crate::rigidity::{assemble, ConstraintSystem};
use crate::surface_gen::PeriodicMesh;

/// Assembly, kernel and classification in one call.
pub fn analyze_modes(
    mesh: &PeriodicMesh,
    opts: &KernelOptions,
    tol_macro: f64,
) -> Result<(ConstraintSystem, ModeSet)> {
    let system = assemble(mesh)?;
    let k = kernel_with(&system, opts)?;
    let set = classify(&k, &system, mesh, tol_macro)?;
    Ok((system, set))
}
