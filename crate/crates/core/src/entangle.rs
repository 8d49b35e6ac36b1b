//! Two-mode entanglement detection by partial transposition of the coefficient table.
//!
//! A negative partially transposed quasi-density matrix certifies entanglement. The
//! converse never holds here: truncation and bound-entangled states both leave
//! "no witness up to N" as the strongest negative answer.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::charfn::characteristic;
use crate::coeffs::{coefficients_alpha_route, coefficients_lambda_route, pt_coefficients, CoefficientTable, Route};
use crate::error::{Error, Result};
use crate::fock::{
    build_matrix, build_matrix_on_basis, find_violated_minor, leading_minors, psd_verdict, QuasiDensityMatrix,
    Verdict,
};
use crate::model::DistributionSpec;

/// Default total-excitation bound (block dimension 15).
pub const DEFAULT_EXCITATION_BOUND: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntanglementVerdict {
    EntangledCertified,
    NoPtWitnessUpToN,
}

impl fmt::Display for EntanglementVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntanglementVerdict::EntangledCertified => "entangled-certified",
            EntanglementVerdict::NoPtWitnessUpToN => "no-PT-witness-up-to-N",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntanglementReport {
    pub verdict: EntanglementVerdict,
    pub truncation: usize,
    pub pt_min_eigenvalue: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub basis: Vec<Vec<usize>>,
    /// Unit vector with negative expectation in the partially transposed matrix.
    pub witness: Option<Vec<C64>>,
    pub witness_value: Option<f64>,
    /// Basis positions of a principal minor with negative determinant.
    pub violated_minor: Option<Vec<usize>>,
    /// Leading principal minors of the partially transposed matrix.
    pub determinant_trace: Vec<f64>,
    pub tolerance: f64,
    pub route: Route,
    pub flags: Vec<String>,
}

fn require_two_modes(spec: &DistributionSpec) -> Result<()> {
    if spec.modes() != 2 {
        return Err(Error::Usage(format!(
            "partial transposition needs a two-mode distribution, got {} mode(s)",
            spec.modes()
        )));
    }
    Ok(())
}

/// λ-route for analytic specs and s-ordered grids, α-route for Wigner grids.
pub fn default_pt_route(spec: &DistributionSpec) -> Route {
    if spec.is_grid() && spec.s() == 0.0 {
        Route::Alpha
    } else {
        Route::Lambda
    }
}

/// Partially transposed coefficient table at a per-mode cutoff.
pub fn pt_table(spec: &DistributionSpec, cutoff: usize, route: Route) -> Result<CoefficientTable> {
    require_two_modes(spec)?;
    let table = match route {
        Route::Lambda => coefficients_lambda_route(&characteristic(spec)?, cutoff)?,
        Route::Alpha => coefficients_alpha_route(spec, cutoff)?,
    };
    pt_coefficients(&table)
}

/// Partially transposed quasi-density matrix on all states with total excitation at most `n`.
pub fn pt_matrix(spec: &DistributionSpec, n: usize, route: Route) -> Result<QuasiDensityMatrix> {
    build_matrix(&pt_table(spec, n, route)?, n)
}

/// Partial-transpose test at total excitation bound `n`.
pub fn pt_test(spec: &DistributionSpec, n: usize, tolerance: Option<f64>) -> Result<EntanglementReport> {
    pt_test_with_route(spec, n, tolerance, default_pt_route(spec))
}

pub fn pt_test_with_route(
    spec: &DistributionSpec,
    n: usize,
    tolerance: Option<f64>,
    route: Route,
) -> Result<EntanglementReport> {
    let table = pt_table(spec, n, route)?;
    let m = build_matrix(&table, n)?;
    let r = psd_verdict(&m, tolerance)?;
    let mut violated = r.violated_minor.clone();
    if violated.is_none() {
        violated = find_violated_minor(&m, None, r.tolerance);
    }
    let certified = r.verdict == Verdict::IllegitimateCertified || violated.is_some();
    Ok(EntanglementReport {
        verdict: if certified {
            EntanglementVerdict::EntangledCertified
        } else {
            EntanglementVerdict::NoPtWitnessUpToN
        },
        truncation: n,
        pt_min_eigenvalue: r.min_eigenvalue,
        eigenvalues: r.eigenvalues,
        basis: r.basis,
        witness: r.certificate,
        witness_value: r.certificate_value,
        violated_minor: violated,
        determinant_trace: leading_minors(&m),
        tolerance: r.tolerance,
        route,
        flags: table.warnings().to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockDeterminant {
    pub determinant: f64,
    pub matrix: DMatrix<C64>,
    pub labels: Vec<Vec<usize>>,
    /// Leading principal minors of the block.
    pub minors: Vec<f64>,
}

/// Determinant of a principal block of the partially transposed matrix. The block
/// defaults to every state with total excitation at most `n`; a negative value
/// certifies entanglement.
pub fn pt_block_determinant(
    spec: &DistributionSpec,
    n: usize,
    block: Option<&[Vec<usize>]>,
) -> Result<BlockDeterminant> {
    require_two_modes(spec)?;
    if n < 1 {
        return Err(Error::Usage("the excitation bound must be at least 1".into()));
    }
    let labels: Vec<Vec<usize>> = match block {
        Some(b) => {
            if let Some(l) = b.iter().find(|l| l.len() != 2 || l[0] + l[1] > n) {
                return Err(Error::Usage(format!("block state {l:?} is outside the excitation bound {n}")));
            }
            b.to_vec()
        }
        None => crate::fock::fock_basis(2, n),
    };
    let m = build_matrix_on_basis(&pt_table(spec, n, default_pt_route(spec))?, labels.clone())?;
    let minors = leading_minors(&m);
    Ok(BlockDeterminant { determinant: m.entries.determinant().re, matrix: m.entries, labels, minors })
}
