//! Doubling, the rotation family `P(theta)` between a boundary projection and
//! the transmission condition, and index glueing.

mod deform;
mod glue;

use std::f64::consts::FRAC_PI_2;

pub use deform::{verify_s6, S6Discretization, S6Report, ThetaSample, DEGENERACY_THRESHOLD};
pub use glue::{glueing_check_circle, glueing_check_interval, post_s9_identities, GlueingKind, GlueingReport, PostS9Report};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::structure::{validate_structure, DiracStructure, OrthoProjection};

/// `gamma~ = diag(gamma, -gamma)`, `A~ = diag(A, -A)` with the swap `tau` of the two copies.
///
/// A grading `omega` of the base becomes `diag(omega, omega)`, which commutes
/// with `tau`.
#[derive(Debug, Clone)]
pub struct DoubledStructure {
    pub base: DiracStructure,
    pub structure: DiracStructure,
    pub tau: ComplexMatrix,
}

impl DoubledStructure {
    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    /// `diag(P, I - P)`: for `P = P_+(A)` this is `P_+(A~)`.
    pub fn lift(&self, p: &OrthoProjection) -> Result<OrthoProjection> {
        linalg::require_square(p.matrix(), self.base.dim())?;
        let m = linalg::block_diag(p.matrix(), p.complement().matrix());
        OrthoProjection::new(m, self.structure.tol().max(p.tol()))
    }
}

pub fn swap(n: usize) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        t[(i, n + i)] = C64::new(1.0, 0.0);
        t[(n + i, i)] = C64::new(1.0, 0.0);
    }
    t
}

pub fn double(s: &DiracStructure) -> Result<DoubledStructure> {
    let n = s.dim();
    let gamma = linalg::block_diag(s.gamma(), &(-s.gamma()));
    let a = linalg::block_diag(s.a_matrix(), &(-s.a_matrix()));
    let omega = s.omega().map(|w| linalg::block_diag(w, w));
    let structure = validate_structure(gamma, a, omega, s.tol())?;
    let tau = swap(n);
    let tol = s.tol() * linalg::max_norm(s.a_matrix()).max(1.0);
    let r = linalg::max_norm(&linalg::anticommutator(&tau, structure.a_matrix()));
    if r > tol {
        return Err(Error::StructureViolation { identity: "tau A~ + A~ tau", residual: r, tol });
    }
    let r = linalg::max_norm(&(&tau * &tau - linalg::identity(2 * n)));
    if r > s.tol() {
        return Err(Error::StructureViolation { identity: "tau^2 - I", residual: r, tol: s.tol() });
    }
    Ok(DoubledStructure { base: s.clone(), structure, tau })
}

/// `P(theta) = U(theta)* P U(theta)` with `U(theta) = cos(theta) I + sin(theta) alpha tau`, `alpha = 2P - I`.
#[derive(Debug, Clone)]
pub struct DeformationFamily {
    p: OrthoProjection,
    tau: ComplexMatrix,
    alpha: ComplexMatrix,
    tol: f64,
}

impl DeformationFamily {
    /// Requires `tau P = (I - P) tau`, which makes `alpha` anticommute with `tau`.
    pub fn new(p: &OrthoProjection, tau: &ComplexMatrix, tol: f64) -> Result<Self> {
        let n = p.dim();
        linalg::require_square(tau, n)?;
        let id = linalg::identity(n);
        let r = linalg::max_norm(&(tau * p.matrix() - (&id - p.matrix()) * tau));
        if r > tol {
            return Err(Error::FamilyInvariantViolation { what: "tau P - (I - P) tau", residual: r });
        }
        let r = linalg::max_norm(&(tau * tau - &id));
        if r > tol {
            return Err(Error::FamilyInvariantViolation { what: "tau^2 - I", residual: r });
        }
        let alpha = p.matrix() * C64::new(2.0, 0.0) - &id;
        let r = linalg::max_norm(&linalg::anticommutator(&alpha, tau));
        if r > tol {
            return Err(Error::FamilyInvariantViolation { what: "alpha tau + tau alpha", residual: r });
        }
        Ok(DeformationFamily { p: p.clone(), tau: tau.clone(), alpha, tol })
    }

    pub fn base(&self) -> &OrthoProjection {
        &self.p
    }

    pub fn tau(&self) -> &ComplexMatrix {
        &self.tau
    }

    pub fn unitary(&self, theta: f64) -> ComplexMatrix {
        let n = self.p.dim();
        linalg::identity(n) * C64::new(theta.cos(), 0.0) + &self.alpha * &self.tau * C64::new(theta.sin(), 0.0)
    }

    /// The member at `theta`, from `cos^2 P + sin^2 (I - P) + sin cos tau`.
    pub fn p_theta(&self, theta: f64) -> Result<OrthoProjection> {
        if !(theta.abs() < FRAC_PI_2) {
            return Err(Error::Domain(format!("theta must lie in (-pi/2, pi/2), got {theta}")));
        }
        let (s, c) = theta.sin_cos();
        let id = linalg::identity(self.p.dim());
        let m = self.p.matrix() * C64::new(c * c, 0.0)
            + (&id - self.p.matrix()) * C64::new(s * s, 0.0)
            + &self.tau * C64::new(s * c, 0.0);
        let u = self.unitary(theta);
        let r = linalg::max_norm(&(u.adjoint() * &u - &id));
        if r > self.tol {
            return Err(Error::FamilyInvariantViolation { what: "U* U - I", residual: r });
        }
        let r = linalg::max_norm(&(u.adjoint() * self.p.matrix() * &u - &m));
        if r > self.tol {
            return Err(Error::FamilyInvariantViolation { what: "U* P U - P(theta)", residual: r });
        }
        OrthoProjection::new(m, self.tol).map_err(|e| match e {
            Error::StructureViolation { identity, residual, .. } => Error::FamilyInvariantViolation { what: identity, residual },
            other => other,
        })
    }

    /// As [`p_theta`](Self::p_theta), also checking `gamma* P(theta) gamma = I - P(theta)`.
    pub fn p_theta_for(&self, s: &DiracStructure, theta: f64) -> Result<OrthoProjection> {
        let p = self.p_theta(theta)?;
        let sym = crate::structure::is_gamma_symmetric(&p, s)?;
        if !sym.holds {
            return Err(Error::FamilyInvariantViolation { what: "gamma* P(theta) gamma - (I - P(theta))", residual: sym.residual });
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_matrix, I};
    use crate::structure::{aps_projection, is_gamma_symmetric};

    fn running_example() -> DiracStructure {
        let gamma = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![I, -I]));
        let sx = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        validate_structure(gamma, sx.clone(), Some(sx), 1e-12).unwrap()
    }

    #[test]
    fn doubling_the_running_example() {
        let d = double(&running_example()).unwrap();
        assert_eq!(d.dim(), 4);
        assert_eq!(linalg::max_norm(&linalg::anticommutator(&d.tau, d.structure.a_matrix())), 0.0);
        let p = d.lift(&aps_projection(&d.base).unwrap()).unwrap();
        assert!(is_gamma_symmetric(&p, &d.structure).unwrap().holds);
        let direct = aps_projection(&d.structure).unwrap();
        assert!(linalg::max_norm(&(p.matrix() - direct.matrix())) < 1e-12);
    }

    #[test]
    fn scalar_family() {
        let p = OrthoProjection::diagonal(&[true, false]);
        let f = DeformationFamily::new(&p, &swap(1), 1e-12).unwrap();
        assert!(linalg::max_norm(&(f.p_theta(0.0).unwrap().matrix() - p.matrix())) < 1e-15);
        let half = real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(linalg::max_norm(&(f.p_theta(std::f64::consts::FRAC_PI_4).unwrap().matrix() - half)) < 1e-15);
        assert!(matches!(f.p_theta(FRAC_PI_2), Err(Error::Domain(_))));
    }

    #[test]
    fn quarter_turn_is_transmission() {
        let d = double(&running_example()).unwrap();
        let p = d.lift(&aps_projection(&d.base).unwrap()).unwrap();
        let f = DeformationFamily::new(&p, &d.tau, 1e-12).unwrap();
        let q = f.p_theta_for(&d.structure, std::f64::consts::FRAC_PI_4).unwrap();
        // Projection onto the +1 eigenspace of tau.
        let plus = (linalg::identity(4) + &d.tau) * C64::new(0.5, 0.0);
        assert!(linalg::max_norm(&(q.matrix() - plus)) < 1e-14);
    }

    #[test]
    fn rejects_non_swapping_projection() {
        let p = OrthoProjection::diagonal(&[true, true]);
        assert!(matches!(DeformationFamily::new(&p, &swap(1), 1e-12), Err(Error::FamilyInvariantViolation { .. })));
    }
}
