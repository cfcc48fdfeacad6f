//! Dense complex linear algebra shared by every module: matrix aliases, JSON
//! records, norms, Hermitian eigensolves and rank/null-space machinery.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Default relative cutoff below which eigenvalues and singular values count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a matrix from real row-major entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols);
    ComplexMatrix::from_fn(rows, cols, |i, j| c(entries[i * cols + j], 0.0))
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { C64::default() })
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// JSON wire form: `{"rows": n, "cols": m, "re": [...], "im": [...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixRecord { rows, cols, re, im }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.rows * self.cols;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::dims("positive dimensions", format!("{}x{}", self.rows, self.cols)));
        }
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::dims(
                format!("{n} entries"),
                format!("{} re / {} im", self.re.len(), self.im.len()),
            ));
        }
        if self.re.iter().chain(&self.im).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix record"));
        }
        Ok(ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            c(self.re[i * self.cols + j], self.im[i * self.cols + j])
        }))
    }
}

pub fn check_finite(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn require_square(m: &ComplexMatrix, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::dims(format!("{n}x{n}"), format!("{}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Largest entry modulus.
pub fn max_norm(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
///
/// Only the Hermitian part of `m` is used.
pub fn eigh(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), ComplexMatrix::zeros(0, 0)));
    }
    let h = hermitian_part(m);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000).ok_or(Error::ConvergenceFailure {
        residual: f64::INFINITY,
        bound: 0.0,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let h = hermitian_part(m);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigvalsh(m)?.first().copied().unwrap_or(0.0))
}

/// Operator 2-norm of a Hermitian matrix.
pub fn hermitian_norm(m: &ComplexMatrix) -> Result<f64> {
    let vals = eigvalsh(m)?;
    Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Cutoff `rank_tol * max(1, scale)` below which a spectral value counts as zero.
pub fn zero_threshold(rank_tol: f64, scale: f64) -> f64 {
    rank_tol * scale.max(1.0)
}

struct SvdFull {
    values: Vec<f64>,
    u: ComplexMatrix,
    v: ComplexMatrix,
}

/// SVD with a full right basis: pads wide matrices with zero rows.
fn svd_full(m: &ComplexMatrix) -> SvdFull {
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = ComplexMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v = svd.v_t.expect("right vectors requested").adjoint();
    SvdFull {
        values: svd.singular_values.iter().copied().collect(),
        u,
        v,
    }
}

/// Numerical rank with cutoff `rank_tol * max(1, sigma_max)`.
pub fn rank(m: &ComplexMatrix, rank_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = svd_full(m);
    let smax = s.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let thr = zero_threshold(rank_tol, smax);
    s.values.iter().filter(|&&v| v > thr).count()
}

/// Dimension of the null space (columns minus rank).
pub fn nullity(m: &ComplexMatrix, rank_tol: f64) -> usize {
    m.ncols() - rank(m, rank_tol)
}

/// Orthonormal basis (as columns) of the null space.
pub fn null_space(m: &ComplexMatrix, rank_tol: f64) -> ComplexMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(cols);
    }
    let s = svd_full(m);
    let smax = s.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let thr = zero_threshold(rank_tol, smax);
    let keep: Vec<usize> = (0..s.values.len()).filter(|&k| s.values[k] <= thr).collect();
    select_columns(&s.v, &keep)
}

/// Orthonormal basis (as columns) of the column space.
pub fn range_basis(m: &ComplexMatrix, rank_tol: f64) -> ComplexMatrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return ComplexMatrix::zeros(m.nrows(), 0);
    }
    let s = svd_full(m);
    let smax = s.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let thr = zero_threshold(rank_tol, smax);
    let keep: Vec<usize> = (0..s.values.len())
        .filter(|&k| s.values[k] > thr && k < s.u.ncols())
        .collect();
    let u = select_columns(&s.u, &keep);
    u.rows(0, m.nrows()).into_owned()
}

pub fn select_columns(m: &ComplexMatrix, keep: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), keep.len(), |i, k| m[(i, keep[k])])
}

/// Stacks matrices with equal column counts vertically.
pub fn vstack(blocks: &[&ComplexMatrix]) -> ComplexMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = ComplexMatrix::zeros(n + m, a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((n, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Orthonormalizes the columns of `m` (thin QR); assumes full column rank.
pub fn orthonormalize(m: &ComplexMatrix) -> ComplexMatrix {
    if m.ncols() == 0 {
        return m.clone();
    }
    m.clone().qr().q()
}

/// Makes the first significant entry of each column real and positive.
pub fn normalize_phases(v: &mut ComplexMatrix) {
    for k in 0..v.ncols() {
        let col_max = v.column(k).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if col_max == 0.0 {
            continue;
        }
        let pivot = v
            .column(k)
            .iter()
            .copied()
            .find(|z| z.norm() > 1e-8 * col_max)
            .expect("column has a nonzero entry");
        let phase = pivot.conj() / pivot.norm();
        for z in v.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
}

/// Spectral function `V f(lambda) V*` from an eigendecomposition.
pub fn spectral_function(values: &[f64], vectors: &ComplexMatrix, f: impl Fn(f64) -> C64) -> ComplexMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (k, &lam) in values.iter().enumerate() {
        let fk = f(lam);
        for i in 0..n {
            scaled[(i, k)] *= fk;
        }
    }
    scaled * vectors.adjoint()
}
