use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{HermitianOperator, OrthoProjection};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, DEFAULT_RANK_TOL};

/// Full eigendecomposition of a Hermitian operator with deterministic ordering.
///
/// Eigenvalues ascend; each eigenvector has its first significant entry real
/// and positive; exactly tied eigenvalues are ordered lexicographically by
/// their (normalized) eigenvector entries.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
    pub rank_tol: f64,
    /// Operator norm, the scale used by the kernel cutoff.
    pub norm: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `|lambda| <= rank_tol * max(1, ||A||)` counts as a kernel eigenvalue.
    pub fn zero_threshold(&self) -> f64 {
        linalg::zero_threshold(self.rank_tol, self.norm)
    }

    pub fn is_zero(&self, lambda: f64) -> bool {
        lambda.abs() <= self.zero_threshold()
    }

    /// Eigenvalue with kernel eigenvalues snapped to exactly zero.
    pub fn snapped(&self, k: usize) -> f64 {
        let l = self.eigenvalues[k];
        if self.is_zero(l) {
            0.0
        } else {
            l
        }
    }

    pub fn indices(&self, window: &SpectralWindow) -> Vec<usize> {
        (0..self.dim()).filter(|&k| window.contains(self.snapped(k))).collect()
    }

    pub fn basis(&self, window: &SpectralWindow) -> ComplexMatrix {
        linalg::select_columns(&self.eigenvectors, &self.indices(window))
    }

    pub fn kernel_basis(&self) -> ComplexMatrix {
        self.basis(&SpectralWindow::kernel())
    }

    pub fn kernel_dim(&self) -> usize {
        self.indices(&SpectralWindow::kernel()).len()
    }

    pub fn count_positive(&self) -> usize {
        self.indices(&SpectralWindow::positive()).len()
    }

    pub fn count_negative(&self) -> usize {
        self.indices(&SpectralWindow::negative()).len()
    }
}

pub fn spectral_factorize(h: &HermitianOperator) -> Result<SpectralData> {
    spectral_factorize_with(h, DEFAULT_RANK_TOL)
}

pub fn spectral_factorize_with(h: &HermitianOperator, rank_tol: f64) -> Result<SpectralData> {
    let a = h.matrix();
    let (mut values, mut vectors) = linalg::eigh(a)?;
    linalg::normalize_phases(&mut vectors);
    let n = values.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .total_cmp(&values[j])
            .then_with(|| lexicographic(&vectors, i, j))
    });
    values = order.iter().map(|&k| values[k]).collect();
    vectors = linalg::select_columns(&vectors, &order);

    let norm = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let residual = {
        let lam = linalg::diag_real(&values);
        linalg::max_norm(&(linalg::hermitian_part(a) * &vectors - &vectors * lam))
    };
    let bound = 1e-10 * norm.max(f64::MIN_POSITIVE);
    if residual > bound && residual > 0.0 {
        return Err(Error::ConvergenceFailure { residual, bound });
    }
    Ok(SpectralData { eigenvalues: values, eigenvectors: vectors, rank_tol, norm })
}

fn lexicographic(v: &ComplexMatrix, i: usize, j: usize) -> Ordering {
    for r in 0..v.nrows() {
        let (a, b) = (v[(r, i)], v[(r, j)]);
        let ord = a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Open(f64),
    Closed(f64),
    Unbounded,
}

/// A real interval with open, closed or infinite ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        let above = match self.lo {
            Bound::Open(a) => x > a,
            Bound::Closed(a) => x >= a,
            Bound::Unbounded => true,
        };
        let below = match self.hi {
            Bound::Open(b) => x < b,
            Bound::Closed(b) => x <= b,
            Bound::Unbounded => true,
        };
        above && below
    }
}

/// Union of intervals selecting eigenvalues. Kernel eigenvalues are tested as exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub intervals: Vec<Interval>,
}

impl SpectralWindow {
    pub fn new(intervals: Vec<Interval>) -> Self {
        SpectralWindow { intervals }
    }

    /// `(0, inf)`
    pub fn positive() -> Self {
        Self::new(vec![Interval { lo: Bound::Open(0.0), hi: Bound::Unbounded }])
    }

    /// `[0, inf)`
    pub fn nonnegative() -> Self {
        Self::new(vec![Interval { lo: Bound::Closed(0.0), hi: Bound::Unbounded }])
    }

    /// `(-inf, 0)`
    pub fn negative() -> Self {
        Self::new(vec![Interval { lo: Bound::Unbounded, hi: Bound::Open(0.0) }])
    }

    pub fn kernel() -> Self {
        Self::new(vec![Interval { lo: Bound::Closed(0.0), hi: Bound::Closed(0.0) }])
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }
}

pub fn spectral_projection(spec: &SpectralData, window: &SpectralWindow) -> OrthoProjection {
    let basis = spec.basis(window);
    OrthoProjection::from_orthonormal_basis(&basis, spec.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag_real, real_matrix};

    fn op(m: ComplexMatrix) -> HermitianOperator {
        HermitianOperator::new(m, 1e-12).unwrap()
    }

    #[test]
    fn diagonal_matrix_sorted_with_permutation_vectors() {
        let s = spectral_factorize(&op(diag_real(&[3.0, 1.0, 2.0]))).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
        let expected = real_matrix(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(linalg::max_norm(&(&s.eigenvectors - expected)) < 1e-14);
    }

    #[test]
    fn pauli_x_eigenvectors() {
        let s = spectral_factorize(&op(real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]))).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14 && (s.eigenvalues[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.eigenvectors[(0, 0)] - c(r, 0.0)).norm() < 1e-14);
        assert!((s.eigenvectors[(1, 0)] - c(-r, 0.0)).norm() < 1e-14);
        assert!((s.eigenvectors[(0, 1)] - c(r, 0.0)).norm() < 1e-14);
        assert!((s.eigenvectors[(1, 1)] - c(r, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn exact_ties_are_ordered_lexicographically() {
        let s = spectral_factorize(&op(linalg::identity(3))).unwrap();
        // Unit vectors sorted by entries: e3 < e2 < e1.
        assert!((s.eigenvectors[(2, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((s.eigenvectors[(0, 2)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn projections_by_window() {
        let s = spectral_factorize(&op(diag_real(&[1.0, -1.0]))).unwrap();
        let p = spectral_projection(&s, &SpectralWindow::positive());
        assert_eq!(p.rank(), 1);
        assert!(linalg::max_norm(&(p.matrix() - diag_real(&[1.0, 0.0]))) < 1e-14);

        let s = spectral_factorize(&op(diag_real(&[0.0, 2.0]))).unwrap();
        let p = spectral_projection(&s, &SpectralWindow::nonnegative());
        assert_eq!(p.rank(), 2);
        assert!(linalg::max_norm(&(p.matrix() - linalg::identity(2))) < 1e-14);
        let p = spectral_projection(&s, &SpectralWindow::positive());
        assert_eq!(p.rank(), 1);
        assert!(linalg::max_norm(&(p.matrix() - diag_real(&[0.0, 1.0]))) < 1e-14);
    }

    #[test]
    fn tiny_eigenvalue_is_kernel() {
        let s = spectral_factorize_with(&op(diag_real(&[1e-14, 5.0])), 1e-9).unwrap();
        let p = spectral_projection(&s, &SpectralWindow::positive());
        assert_eq!(p.rank(), 1);
        assert_eq!(s.kernel_dim(), 1);
    }

    #[test]
    fn general_window_union() {
        let s = spectral_factorize(&op(diag_real(&[-3.0, -1.0, 0.5, 2.0]))).unwrap();
        let w = SpectralWindow::new(vec![
            Interval { lo: Bound::Closed(-3.0), hi: Bound::Open(-1.0) },
            Interval { lo: Bound::Open(0.5), hi: Bound::Closed(2.0) },
        ]);
        assert_eq!(s.indices(&w), vec![0, 3]);
    }
}
