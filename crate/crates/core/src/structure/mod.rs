//! Coefficient data of the model operator `D = gamma (d/dx + A)` and the
//! projection machinery built on it.

mod boundary;
mod projection;
mod spectral;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, MatrixRecord, DEFAULT_RANK_TOL, I};

pub use boundary::{
    aps_projection, is_gamma_symmetric, is_wellposed, symmetric_extension_check, ExtensionCheck,
    GammaSymmetry, Verdict, WellPosedness,
};
pub use projection::{fredholm_pair_index, pair_intersections, OrthoProjection, PairIntersections};
pub use spectral::{
    spectral_factorize, spectral_factorize_with, spectral_projection, Bound, Interval, SpectralData,
    SpectralWindow,
};

/// Default structural tolerance `1e-10 * dim`.
pub fn default_tol(dim: usize) -> f64 {
    1e-10 * dim.max(1) as f64
}

/// A square matrix certified Hermitian up to `tol` in the max norm.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
    tol: f64,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        let n = matrix.nrows();
        linalg::require_square(&matrix, n)?;
        linalg::check_finite(&matrix, "hermitian operator")?;
        let residual = linalg::max_norm(&(&matrix - matrix.adjoint()));
        if residual > tol {
            return Err(Error::StructureViolation { identity: "A - A*", residual, tol });
        }
        Ok(HermitianOperator { matrix, tol })
    }

    /// Wraps the Hermitian part of `m`, which is exact by construction.
    pub fn from_hermitian_part(m: &ComplexMatrix) -> Self {
        let dim = m.nrows();
        HermitianOperator { matrix: linalg::hermitian_part(m), tol: default_tol(dim) }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        HermitianOperator { matrix: linalg::diag_real(values), tol: default_tol(values.len()) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn neg(&self) -> Self {
        HermitianOperator { matrix: -&self.matrix, tol: self.tol }
    }

    pub fn spectral(&self) -> Result<SpectralData> {
        spectral_factorize(self)
    }
}

/// Validated coefficient data `(gamma, A, omega)`.
#[derive(Debug, Clone)]
pub struct DiracStructure {
    gamma: ComplexMatrix,
    a: HermitianOperator,
    omega: Option<ComplexMatrix>,
    tol: f64,
    rank_tol: f64,
    residuals: BTreeMap<String, f64>,
}

/// Checks every structural identity and returns the validated structure.
///
/// Identities are tested in a fixed order and the first one above `tol` is
/// reported. When `omega` is present it must be a self-adjoint involution
/// commuting with `A` and anticommuting with `gamma`.
pub fn validate_structure(
    gamma: ComplexMatrix,
    a: ComplexMatrix,
    omega: Option<ComplexMatrix>,
    tol: f64,
) -> Result<DiracStructure> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("structural tolerance must be positive, got {tol}")));
    }
    let n = gamma.nrows();
    if n == 0 {
        return Err(Error::dims("positive dimension", "0"));
    }
    linalg::require_square(&gamma, n)?;
    linalg::require_square(&a, n)?;
    linalg::check_finite(&gamma, "gamma")?;
    linalg::check_finite(&a, "A")?;
    if let Some(w) = &omega {
        linalg::require_square(w, n)?;
        linalg::check_finite(w, "omega")?;
    }

    let id = linalg::identity(n);
    let mut checks: Vec<(&'static str, f64)> = vec![
        ("A - A*", linalg::max_norm(&(&a - a.adjoint()))),
        ("gamma* + gamma", linalg::max_norm(&(gamma.adjoint() + &gamma))),
        ("gamma^2 + I", linalg::max_norm(&(&gamma * &gamma + &id))),
        ("gamma A + A gamma", linalg::max_norm(&linalg::anticommutator(&gamma, &a))),
    ];
    if let Some(w) = &omega {
        checks.push(("omega - omega*", linalg::max_norm(&(w - w.adjoint()))));
        checks.push(("omega^2 - I", linalg::max_norm(&(w * w - &id))));
        checks.push(("omega A - A omega", linalg::max_norm(&linalg::commutator(w, &a))));
        checks.push(("omega gamma + gamma omega", linalg::max_norm(&linalg::anticommutator(w, &gamma))));
    }
    for &(identity, residual) in &checks {
        if residual > tol {
            return Err(Error::StructureViolation { identity, residual, tol });
        }
    }
    let residuals = checks.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Ok(DiracStructure {
        gamma,
        a: HermitianOperator { matrix: a, tol },
        omega,
        tol,
        rank_tol: DEFAULT_RANK_TOL,
        residuals,
    })
}

/// Orthonormal eigenbases of `gamma` and the off-diagonal blocks of `A`.
#[derive(Debug, Clone)]
pub struct GammaSplit {
    /// Columns span `ker(gamma - i)`.
    pub h_plus: ComplexMatrix,
    /// Columns span `ker(gamma + i)`.
    pub h_minus: ComplexMatrix,
    /// `A_+ : H_+ -> H_-`.
    pub a_plus: ComplexMatrix,
    /// `A_- : H_- -> H_+`.
    pub a_minus: ComplexMatrix,
}

impl DiracStructure {
    /// Validates with the default tolerance `1e-10 * dim`.
    pub fn new(gamma: ComplexMatrix, a: ComplexMatrix, omega: Option<ComplexMatrix>) -> Result<Self> {
        let tol = default_tol(gamma.nrows());
        validate_structure(gamma, a, omega, tol)
    }

    pub fn with_rank_tol(mut self, rank_tol: f64) -> Self {
        self.rank_tol = rank_tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn gamma(&self) -> &ComplexMatrix {
        &self.gamma
    }

    pub fn a(&self) -> &HermitianOperator {
        &self.a
    }

    pub fn a_matrix(&self) -> &ComplexMatrix {
        &self.a.matrix
    }

    pub fn omega(&self) -> Option<&ComplexMatrix> {
        self.omega.as_ref()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Max-norm residual of each structural identity.
    pub fn residuals(&self) -> &BTreeMap<String, f64> {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().fold(0.0, |a, &b| a.max(b))
    }

    pub fn spectral(&self) -> Result<SpectralData> {
        spectral_factorize_with(&self.a, self.rank_tol)
    }

    /// Copy of the structure with the grading dropped.
    pub fn without_grading(&self) -> Self {
        let mut s = self.clone();
        s.omega = None;
        s.residuals.retain(|k, _| !k.contains("omega"));
        s
    }

    pub fn gamma_split(&self) -> Result<GammaSplit> {
        // i*gamma is Hermitian with eigenvalue -1 on ker(gamma - i) and +1 on ker(gamma + i).
        let igamma = &self.gamma * I;
        let (vals, mut vecs) = linalg::eigh(&igamma)?;
        linalg::normalize_phases(&mut vecs);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            if (v + 1.0).abs() <= self.tol {
                plus.push(k);
            } else if (v - 1.0).abs() <= self.tol {
                minus.push(k);
            } else {
                return Err(Error::StructureViolation {
                    identity: "spectrum of gamma in {i, -i}",
                    residual: (v.abs() - 1.0).abs(),
                    tol: self.tol,
                });
            }
        }
        let h_plus = linalg::select_columns(&vecs, &plus);
        let h_minus = linalg::select_columns(&vecs, &minus);
        let a = self.a_matrix();
        let a_plus = h_minus.adjoint() * a * &h_plus;
        let a_minus = h_plus.adjoint() * a * &h_minus;
        Ok(GammaSplit { h_plus, h_minus, a_plus, a_minus })
    }

    /// `dim ker A ∩ ker(gamma - i) - dim ker A ∩ ker(gamma + i)`, from stacked constraint systems.
    pub fn ind_a_plus(&self) -> i64 {
        let n = self.dim();
        let a = self.a_matrix();
        let id = linalg::identity(n);
        let shift_plus = &self.gamma - &id * I;
        let shift_minus = &self.gamma + &id * I;
        let plus = linalg::nullity(&linalg::vstack(&[a, &shift_plus]), self.rank_tol);
        let minus = linalg::nullity(&linalg::vstack(&[a, &shift_minus]), self.rank_tol);
        plus as i64 - minus as i64
    }

    /// Signature of the Hermitian form `i gamma` restricted to `ker A`.
    ///
    /// Since `i gamma = -1` on `ker(gamma - i)` this is `-ind_a_plus`; the two
    /// independent computations are compared and a mismatch is an error.
    pub fn kernel_signature(&self) -> Result<i64> {
        let sig = self.raw_kernel_signature()?;
        let ind = self.ind_a_plus();
        if sig != -ind {
            return Err(Error::Inconsistent { what: "kernel signature vs -ind A_+", left: sig, right: -ind });
        }
        Ok(sig)
    }

    fn raw_kernel_signature(&self) -> Result<i64> {
        let k = self.spectral()?.kernel_basis();
        if k.ncols() == 0 {
            return Ok(0);
        }
        let form = k.adjoint() * (&self.gamma * I) * &k;
        let vals = linalg::eigvalsh(&form)?;
        let pos = vals.iter().filter(|&&v| v > 0.5).count() as i64;
        let neg = vals.iter().filter(|&&v| v < -0.5).count() as i64;
        Ok(pos - neg)
    }

    pub fn omega_reduce(&self, p: Option<&OrthoProjection>) -> Result<OmegaReduction> {
        let omega = self.omega.as_ref().ok_or(Error::MissingGrading)?;
        omega_reduce(self.a_matrix(), omega, p, self.tol)
    }

    pub fn record(&self) -> StructureRecord {
        StructureRecord {
            gamma: MatrixRecord::from_matrix(&self.gamma),
            a: MatrixRecord::from_matrix(self.a_matrix()),
            omega: self.omega.as_ref().map(MatrixRecord::from_matrix),
            tol: Some(self.tol),
        }
    }
}

/// JSON form of a structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRecord {
    pub gamma: MatrixRecord,
    pub a: MatrixRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<MatrixRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl StructureRecord {
    pub fn to_structure(&self) -> Result<DiracStructure> {
        let gamma = self.gamma.to_matrix()?;
        let tol = self.tol.unwrap_or_else(|| default_tol(gamma.nrows()));
        let omega = self.omega.as_ref().map(|w| w.to_matrix()).transpose()?;
        validate_structure(gamma, self.a.to_matrix()?, omega, tol)
    }
}

/// Restriction of `A` (and optionally `P`) to the `+1` eigenspace of `omega`.
#[derive(Debug, Clone)]
pub struct OmegaReduction {
    pub a_plus: HermitianOperator,
    pub p_plus: Option<OrthoProjection>,
    /// Orthonormal basis of `ker(omega - I)`.
    pub basis: ComplexMatrix,
}

/// Restricts `a` and `p` to `ker(omega - I)`, expressed in an orthonormal basis of that space.
pub fn omega_reduce(
    a: &ComplexMatrix,
    omega: &ComplexMatrix,
    p: Option<&OrthoProjection>,
    tol: f64,
) -> Result<OmegaReduction> {
    let n = a.nrows();
    linalg::require_square(omega, n)?;
    let ca = linalg::max_norm(&linalg::commutator(omega, a));
    if ca > tol {
        return Err(Error::CommutationViolation { what: "[omega, A]", residual: ca });
    }
    if let Some(p) = p {
        linalg::require_square(p.matrix(), n)?;
        let pa = linalg::max_norm(&linalg::commutator(p.matrix(), a));
        if pa > tol {
            return Err(Error::CommutationViolation { what: "[P, A]", residual: pa });
        }
        let pw = linalg::max_norm(&linalg::commutator(p.matrix(), omega));
        if pw > tol {
            return Err(Error::CommutationViolation { what: "[P, omega]", residual: pw });
        }
    }
    let (vals, mut vecs) = linalg::eigh(omega)?;
    linalg::normalize_phases(&mut vecs);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > 0.0).collect();
    let w = linalg::select_columns(&vecs, &keep);
    let m = keep.len();
    let a_plus = HermitianOperator::from_hermitian_part(&(w.adjoint() * a * &w));
    let p_plus = p
        .map(|p| OrthoProjection::new(linalg::hermitian_part(&(w.adjoint() * p.matrix() * &w)), default_tol(m).max(tol)))
        .transpose()?;
    Ok(OmegaReduction { a_plus, p_plus, basis: w })
}
