use serde::{Deserialize, Serialize};

use super::default_tol;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, MatrixRecord, DEFAULT_RANK_TOL};

/// Orthogonal projection with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoProjection {
    matrix: ComplexMatrix,
    rank: usize,
    tol: f64,
}

impl OrthoProjection {
    /// Checks `P = P*`, `P^2 = P` and `tr P ≈ rank` within `tol` (the trace within `tol * dim`).
    pub fn new(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        let n = matrix.nrows();
        linalg::require_square(&matrix, n)?;
        linalg::check_finite(&matrix, "projection")?;
        let sa = linalg::max_norm(&(&matrix - matrix.adjoint()));
        if sa > tol {
            return Err(Error::StructureViolation { identity: "P - P*", residual: sa, tol });
        }
        let idem = linalg::max_norm(&(&matrix * &matrix - &matrix));
        if idem > tol {
            return Err(Error::StructureViolation { identity: "P^2 - P", residual: idem, tol });
        }
        let rank = linalg::rank(&matrix, DEFAULT_RANK_TOL);
        let trace = matrix.trace().re;
        let tr_res = (trace - rank as f64).abs();
        if tr_res > tol * n.max(1) as f64 {
            return Err(Error::StructureViolation { identity: "tr P - rank", residual: tr_res, tol });
        }
        Ok(OrthoProjection { matrix, rank, tol })
    }

    /// Projection onto the span of orthonormal columns.
    pub fn from_orthonormal_basis(basis: &ComplexMatrix, dim: usize) -> Self {
        if basis.ncols() == 0 {
            return Self::zero(dim);
        }
        OrthoProjection { matrix: basis * basis.adjoint(), rank: basis.ncols(), tol: default_tol(dim) }
    }

    /// Projection onto the column span of an arbitrary matrix.
    pub fn from_span(m: &ComplexMatrix) -> Self {
        let basis = linalg::range_basis(m, DEFAULT_RANK_TOL);
        Self::from_orthonormal_basis(&basis, m.nrows())
    }

    pub fn zero(dim: usize) -> Self {
        OrthoProjection { matrix: ComplexMatrix::zeros(dim, dim), rank: 0, tol: default_tol(dim) }
    }

    pub fn identity(dim: usize) -> Self {
        OrthoProjection { matrix: linalg::identity(dim), rank: dim, tol: default_tol(dim) }
    }

    /// Diagonal projection with ones at the flagged positions.
    pub fn diagonal(flags: &[bool]) -> Self {
        let d: Vec<f64> = flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        OrthoProjection {
            matrix: linalg::diag_real(&d),
            rank: flags.iter().filter(|&&f| f).count(),
            tol: default_tol(flags.len()),
        }
    }

    /// `I - P`.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        OrthoProjection { matrix: linalg::identity(n) - &self.matrix, rank: n - self.rank, tol: self.tol }
    }

    /// `U* P U` for unitary `U`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Self {
        let m = linalg::hermitian_part(&(u.adjoint() * &self.matrix * u));
        OrthoProjection { matrix: m, rank: self.rank, tol: self.tol }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Orthonormal basis of the range.
    pub fn range_basis(&self) -> ComplexMatrix {
        linalg::range_basis(&self.matrix, DEFAULT_RANK_TOL)
    }

    /// Orthonormal basis of the kernel.
    pub fn kernel_basis(&self) -> ComplexMatrix {
        self.complement().range_basis()
    }

    pub fn record(&self) -> MatrixRecord {
        MatrixRecord::from_matrix(&self.matrix)
    }

    pub fn from_record(r: &MatrixRecord) -> Result<Self> {
        let m = r.to_matrix()?;
        let tol = default_tol(m.nrows()).max(1e-9);
        Self::new(m, tol)
    }
}

impl Serialize for OrthoProjection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrthoProjection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatrixRecord::deserialize(d)?;
        Self::from_record(&r).map_err(serde::de::Error::custom)
    }
}

/// The two intersection dimensions entering a pair index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIntersections {
    /// `dim(ker P2 ∩ im P1)`
    pub kernel: usize,
    /// `dim(ker P1 ∩ im P2)`
    pub cokernel: usize,
}

impl PairIntersections {
    pub fn index(&self) -> i64 {
        self.kernel as i64 - self.cokernel as i64
    }
}

pub fn pair_intersections(p1: &OrthoProjection, p2: &OrthoProjection) -> Result<PairIntersections> {
    if p1.dim() != p2.dim() {
        return Err(Error::dims(format!("dim {}", p1.dim()), format!("dim {}", p2.dim())));
    }
    let q1 = p1.complement();
    let q2 = p2.complement();
    // v in ker P2 ∩ im P1  <=>  P2 v = 0 and (I - P1) v = 0.
    let kernel = linalg::nullity(&linalg::vstack(&[p2.matrix(), q1.matrix()]), DEFAULT_RANK_TOL);
    let cokernel = linalg::nullity(&linalg::vstack(&[p1.matrix(), q2.matrix()]), DEFAULT_RANK_TOL);
    Ok(PairIntersections { kernel, cokernel })
}

/// `ind(P1, P2) = dim(ker P2 ∩ im P1) - dim(ker P1 ∩ im P2)`.
pub fn fredholm_pair_index(p1: &OrthoProjection, p2: &OrthoProjection) -> Result<i64> {
    Ok(pair_intersections(p1, p2)?.index())
}
