use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::structure::DiracStructure;

/// `sum_{|k| <= K} tr[w e^{-t((2 pi k / L)^2 + A^2)}]` for any Hermitian involution `w` commuting with `A`.
///
/// The mode sum factors as `theta(t) tr[w e^{-t A^2}]`. With a grading that
/// anticommutes with `gamma` the second factor vanishes identically; other
/// involutions are accepted here to exhibit the large-`t` limit `tr[w|ker A]`.
pub fn circle_supertrace_raw(a: &ComplexMatrix, w: &ComplexMatrix, circumference: f64, t: f64, modes: usize, tol: f64) -> Result<f64> {
    let n = a.nrows();
    linalg::require_square(a, n)?;
    linalg::require_square(w, n)?;
    if !(t > 0.0 && t.is_finite()) || !(circumference > 0.0 && circumference.is_finite()) {
        return Err(Error::Domain(format!("circle supertrace needs t > 0 and L > 0, got t = {t}, L = {circumference}")));
    }
    let res = linalg::max_norm(&linalg::commutator(w, a));
    if res > 1e-8 * linalg::max_norm(a).max(1.0) {
        return Err(Error::CommutationViolation { what: "[omega, A]", residual: res });
    }
    let freq = 2.0 * PI / circumference;
    let bound = (-t * (freq * (modes as f64 + 1.0)).powi(2)).exp() * n as f64;
    // The neglected modes |k| > K sum to at most this bound times a geometric factor below 2.
    if 2.0 * bound > tol {
        return Err(Error::TailBoundViolated { bound: 2.0 * bound, tol });
    }
    let theta: f64 = 1.0 + 2.0 * (1..=modes).map(|k| (-t * (freq * k as f64).powi(2)).exp()).sum::<f64>();
    let (vals, vecs) = linalg::eigh(a)?;
    let mut tr = 0.0;
    for (k, &l) in vals.iter().enumerate() {
        let v = vecs.column(k);
        tr += (-t * l * l).exp() * (v.adjoint() * w * v)[(0, 0)].re;
    }
    Ok(theta * tr)
}

/// Supertrace `tr[omega e^{-t D^2}]` of the circle model `gamma(d/dx + A)` with constant `A`.
pub fn circle_supertrace(s: &DiracStructure, circumference: f64, t: f64, modes: usize, tol: f64) -> Result<f64> {
    let w = s.omega().ok_or(Error::MissingGrading)?;
    circle_supertrace_raw(s.a_matrix(), w, circumference, t, modes, tol)
}

/// Numbers of square-integrable solutions of `D* f = ±i f` on the half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeficiencyIndices {
    pub n_plus: usize,
    pub n_minus: usize,
}

impl DeficiencyIndices {
    pub fn admits_selfadjoint_extension(&self) -> bool {
        self.n_plus == self.n_minus
    }
}

/// `D* f = ±i f` reads `f' = -(A ± i gamma) f`; decaying solutions
/// span the positive spectral subspace of the Hermitian matrix `A ± i gamma`.
pub fn deficiency_indices(s: &DiracStructure) -> Result<DeficiencyIndices> {
    let ig = s.gamma() * linalg::I;
    let count = |m: ComplexMatrix| -> Result<usize> {
        let h = linalg::hermitian_part(&m);
        let thr = linalg::zero_threshold(s.rank_tol(), linalg::hermitian_norm(&h)?);
        Ok(linalg::eigvalsh(&h)?.iter().filter(|&&l| l > thr).count())
    };
    let n_plus = count(s.a_matrix() + &ig)?;
    let n_minus = count(s.a_matrix() - &ig)?;
    let d = DeficiencyIndices { n_plus, n_minus };
    let sig = s.kernel_signature()?;
    if n_plus as i64 - n_minus as i64 != sig {
        return Err(Error::Inconsistent { what: "n+ - n- vs kernel signature", left: n_plus as i64 - n_minus as i64, right: sig });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, real_matrix, I};
    use crate::structure::validate_structure;

    fn running_example() -> DiracStructure {
        let gamma = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![I, -I]));
        let sx = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        validate_structure(gamma, sx.clone(), Some(sx), 1e-12).unwrap()
    }

    #[test]
    fn graded_supertrace_vanishes() {
        let s = running_example();
        for &t in &[0.1, 0.5, 2.0] {
            let v = circle_supertrace(&s, 2.0 * PI, t, 40, 1e-12).unwrap();
            assert!(v.abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn raw_supertrace_tends_to_kernel_trace() {
        let a = diag_real(&[0.0, 1.0, 2.0]);
        let w = diag_real(&[1.0, -1.0, 1.0]);
        let v = circle_supertrace_raw(&a, &w, 2.0 * PI, 40.0, 10, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-15 + (-40.0f64).exp() * 4.0, "{v}");
    }

    #[test]
    fn tail_bound_is_enforced() {
        let s = running_example();
        assert!(matches!(circle_supertrace(&s, 2.0 * PI, 0.01, 3, 1e-10), Err(Error::TailBoundViolated { .. })));
        assert!(matches!(circle_supertrace(&s.without_grading(), 1.0, 1.0, 30, 1e-10), Err(Error::MissingGrading)));
    }

    #[test]
    fn deficiency_examples() {
        // gamma = i, A = 0: i d/dx on the half-line.
        let s = validate_structure(ComplexMatrix::from_element(1, 1, I), ComplexMatrix::zeros(1, 1), None, 1e-12).unwrap();
        let d = deficiency_indices(&s).unwrap();
        assert_eq!(d, DeficiencyIndices { n_plus: 0, n_minus: 1 });
        assert!(!d.admits_selfadjoint_extension());

        let gamma = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![I, -I]));
        let s = validate_structure(gamma, ComplexMatrix::zeros(2, 2), None, 1e-12).unwrap();
        assert_eq!(deficiency_indices(&s).unwrap(), DeficiencyIndices { n_plus: 1, n_minus: 1 });

        let d = deficiency_indices(&running_example()).unwrap();
        assert_eq!(d, DeficiencyIndices { n_plus: 1, n_minus: 1 });
    }
}
