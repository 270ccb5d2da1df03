//! Stretching-bending reciprocity: every effective strain must pair to
//! zero with every effective curvature of the same surface.
//!
//! Two readings of the strain are checked. The raw one uses
//! `E_ab = <p_a, pdot_b>` (length^2), the normalized one the Cartesian
//! strain `E_ab / (L_a L_b)`. On square cells they differ by a constant
//! factor; on stretched cells only one of them can vanish in general.

use serde::{Deserialize, Serialize};

use crate::modes::{principal_basis, sym_norm, ModeSet, POISSON_TOL};

/// Largest relative pairing residual accepted as zero.
pub const THEOREM_TOL: f64 = 1e-8;

/// Largest accepted `|nu_in + nu_out|`.
pub const POISSON_IDENTITY_TOL: f64 = 1e-6;

/// `E11 chi22 - 2 E12 chi12 + E22 chi11` with raw strains.
pub fn pairing_raw(e: [f64; 3], chi: [f64; 3]) -> f64 {
    (e[0] * chi[1] + e[1] * chi[0]) - 2.0 * e[2] * chi[2]
}

/// Same form with normalized (dimensionless) strains.
pub fn pairing_normalized(e_bar: [f64; 3], chi: [f64; 3]) -> f64 {
    pairing_raw(e_bar, chi)
}

/// `|pairing| / (|E|_F |chi|_F)`, zero if either tensor vanishes.
pub fn relative_residual(pairing: f64, e: [f64; 3], chi: [f64; 3]) -> f64 {
    let d = sym_norm(e) * sym_norm(chi);
    if d == 0.0 {
        0.0
    } else {
        pairing.abs() / d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Raw,
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Both,
    Raw,
    Normalized,
    Neither,
    /// No membrane or no flexure mode, so nothing to pair.
    Vacuous,
}

impl Verdict {
    fn from_residuals(raw: f64, normalized: f64) -> Self {
        match (raw <= THEOREM_TOL, normalized <= THEOREM_TOL) {
            (true, true) => Self::Both,
            (true, false) => Self::Raw,
            (false, true) => Self::Normalized,
            (false, false) => Self::Neither,
        }
    }

    /// Whether the convention vanishes on every pair (vacuously so if none).
    pub fn holds(self, c: Convention) -> bool {
        match self {
            Self::Both | Self::Vacuous => true,
            Self::Raw => c == Convention::Raw,
            Self::Normalized => c == Convention::Normalized,
            Self::Neither => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub membrane: usize,
    pub flexure: usize,
    pub raw: f64,
    pub raw_residual: f64,
    pub normalized: f64,
    pub normalized_residual: f64,
}

/// Poisson coefficients of one strain/curvature pair in the principal
/// frame of the normalized strain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonRecord {
    pub membrane: usize,
    pub flexure: usize,
    pub angle: f64,
    pub e_principal: [f64; 3],
    pub chi_principal: [f64; 3],
    pub nu_in: f64,
    pub nu_out: f64,
    /// `|nu_in + nu_out|`.
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReciprocityReport {
    pub pairs: Vec<PairRecord>,
    pub max_raw_residual: f64,
    pub max_normalized_residual: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vacuous_reason: Option<String>,
    pub poisson: Vec<PoissonRecord>,
}

impl ReciprocityReport {
    pub fn max_poisson_defect(&self) -> Option<f64> {
        self.poisson.iter().map(|p| p.defect).reduce(f64::max)
    }
}

/// Pairs every membrane strain with every flexure curvature.
pub fn verify(set: &ModeSet) -> ReciprocityReport {
    let membrane: Vec<_> = set.membrane().collect();
    let flexure: Vec<_> = set.flexure().collect();
    let mut pairs = Vec::new();
    let mut poisson = Vec::new();
    for m in &membrane {
        for f in &flexure {
            let (e, e_bar, chi) = (m.macro_data.e, m.macro_data.e_bar, f.macro_data.chi);
            let raw = pairing_raw(e, chi);
            let normalized = pairing_normalized(e_bar, chi);
            pairs.push(PairRecord {
                membrane: m.id,
                flexure: f.id,
                raw,
                raw_residual: relative_residual(raw, e, chi),
                normalized,
                normalized_residual: relative_residual(normalized, e_bar, chi),
            });
            let Ok(p) = principal_basis(e_bar, chi) else {
                continue;
            };
            if p.e[0].abs() > POISSON_TOL * sym_norm(e_bar) && p.chi[0].abs() > POISSON_TOL * sym_norm(chi) {
                let nu_in = -p.e[1] / p.e[0];
                let nu_out = -p.chi[1] / p.chi[0];
                poisson.push(PoissonRecord {
                    membrane: m.id,
                    flexure: f.id,
                    angle: p.angle,
                    e_principal: p.e,
                    chi_principal: p.chi,
                    nu_in,
                    nu_out,
                    defect: (nu_in + nu_out).abs(),
                });
            }
        }
    }
    let max_raw_residual = pairs.iter().map(|p| p.raw_residual).fold(0.0, f64::max);
    let max_normalized_residual = pairs.iter().map(|p| p.normalized_residual).fold(0.0, f64::max);
    let vacuous_reason = match (membrane.is_empty(), flexure.is_empty()) {
        (true, true) => Some("no membrane and no flexure modes".to_owned()),
        (true, false) => Some("no membrane modes".to_owned()),
        (false, true) => Some("no flexure modes".to_owned()),
        (false, false) => None,
    };
    let verdict = if vacuous_reason.is_some() {
        Verdict::Vacuous
    } else {
        Verdict::from_residuals(max_raw_residual, max_normalized_residual)
    };
    ReciprocityReport {
        pairs,
        max_raw_residual,
        max_normalized_residual,
        verdict,
        vacuous_reason,
        poisson,
    }
}

/// Conventions that hold under every verdict in the list.
pub fn consistent_conventions(verdicts: &[Verdict]) -> Vec<Convention> {
    [Convention::Raw, Convention::Normalized]
        .into_iter()
        .filter(|&c| verdicts.iter().all(|v| v.holds(c)))
        .collect()
}
