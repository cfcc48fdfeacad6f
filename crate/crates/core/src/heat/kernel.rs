use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::normal::joint_components;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};
use crate::quad;
use crate::special::{erfc, erfcx};
use crate::structure::{is_gamma_symmetric, DiracStructure, OrthoProjection};

/// Boundary condition seen by one eigencomponent of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `f(0) = 0` (component in the range of `P`).
    Dirichlet,
    /// `f'(0) + lambda f(0) = 0` (component in the kernel of `P`).
    Robin,
}

/// A joint eigencomponent `(lambda, boundary kind, unit vector)` of `A` and `P`.
#[derive(Debug, Clone)]
pub struct Block {
    pub lambda: f64,
    pub kind: BoundaryKind,
    pub vector: ComplexMatrix,
}

/// Splits `(A, P)` into scalar half-line problems. `P` must commute with `A`.
pub fn blocks(a: &ComplexMatrix, p: &OrthoProjection, tol: f64) -> Result<Vec<Block>> {
    let res = linalg::max_norm(&linalg::commutator(p.matrix(), a));
    if res > tol {
        return Err(Error::CommutationViolation { what: "[P, A]", residual: res });
    }
    Ok(joint_components(&[a], p.matrix())?
        .into_iter()
        .map(|c| Block {
            lambda: c.values[0],
            kind: if c.in_range { BoundaryKind::Dirichlet } else { BoundaryKind::Robin },
            vector: c.vector,
        })
        .collect())
}

fn gauss(w: f64, t: f64) -> f64 {
    (-w * w / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// `lambda e^{-lambda w} erfc(w / (2 sqrt t) - lambda sqrt t)`, the closed form of
/// `(pi t)^{-1/2} int_0^infinity e^{-(w+z)^2/4t} lambda e^{lambda z - t lambda^2} dz`.
pub fn robin_correction(lambda: f64, w: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let st = t.sqrt();
    let z = w / (2.0 * st) - lambda * st;
    if z >= 0.0 {
        lambda * (-w * w / (4.0 * t) - lambda * lambda * t).exp() * erfcx(z)
    } else {
        lambda * (-lambda * w).exp() * erfc(z)
    }
}

/// The same correction term by adaptive quadrature of the `z`-integral.
pub fn robin_correction_quadrature(lambda: f64, w: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    // Exponent -(w+z)^2/4t + lambda z - t lambda^2 peaks at z = 2 t lambda - w.
    let peak = (2.0 * t * lambda - w).max(0.0);
    let width = 2.0 * t.sqrt();
    let hi = peak + 40.0 * width;
    let f = |z: f64| (-(w + z).powi(2) / (4.0 * t) + lambda * z - t * lambda * lambda).exp();
    let breaks: Vec<f64> = if peak > 0.0 { vec![0.0, peak, hi] } else { vec![0.0, hi] };
    let r = quad::adaptive_with_breaks(f, &breaks, 1e-300, 1e-14);
    lambda * r.value / (PI * t).sqrt()
}

/// Scalar heat kernel of `-d^2/dx^2 + lambda^2` on the half-line.
///
/// Dirichlet: `e^{-t lambda^2}(g(x-y) - g(x+y))`. Robin with
/// `f' + lambda f = 0`: `e^{-t lambda^2}(g(x-y) + g(x+y))` plus the correction
/// term, which for `lambda > 0` contains the bound state `2 lambda e^{-lambda(x+y)}`.
pub fn block_kernel(lambda: f64, kind: BoundaryKind, x: f64, y: f64, t: f64) -> f64 {
    let decay = (-t * lambda * lambda).exp();
    let (direct, image) = (gauss(x - y, t), gauss(x + y, t));
    match kind {
        BoundaryKind::Dirichlet => decay * (direct - image),
        BoundaryKind::Robin => decay * (direct + image) + robin_correction(lambda, x + y, t),
    }
}

fn check_point(x: f64, y: f64, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain(format!("heat kernel needs x, y >= 0, got ({x}, {y})")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionMethod {
    #[default]
    ClosedForm,
    Quadrature,
}

/// Heat kernel matrix of `D_P^2` at `(x, y, t)`.
///
/// For `P = P_+(A)` this is the Sommerfeld formula; any gamma-symmetric `P`
/// commuting with `A` is accepted, components with `lambda > 0` and `Pv = 0`
/// carrying their bound state.
pub fn sommerfeld_kernel(s: &DiracStructure, p: &OrthoProjection, x: f64, y: f64, t: f64) -> Result<ComplexMatrix> {
    sommerfeld_kernel_with(s, p, x, y, t, CorrectionMethod::ClosedForm)
}

pub fn sommerfeld_kernel_with(
    s: &DiracStructure,
    p: &OrthoProjection,
    x: f64,
    y: f64,
    t: f64,
    method: CorrectionMethod,
) -> Result<ComplexMatrix> {
    check_point(x, y, t)?;
    let sym = is_gamma_symmetric(p, s)?;
    if !sym.holds {
        return Err(Error::StructureViolation { identity: "gamma* P gamma - (I - P)", residual: sym.residual, tol: s.tol() });
    }
    let bl = blocks(s.a_matrix(), p, s.tol())?;
    Ok(kernel_from_blocks(&bl, s.dim(), x, y, t, method))
}

pub(crate) fn kernel_from_blocks(bl: &[Block], n: usize, x: f64, y: f64, t: f64, method: CorrectionMethod) -> ComplexMatrix {
    let mut k = ComplexMatrix::zeros(n, n);
    for b in bl {
        let value = match (b.kind, method) {
            (BoundaryKind::Robin, CorrectionMethod::Quadrature) => {
                let decay = (-t * b.lambda * b.lambda).exp();
                decay * (gauss(x - y, t) + gauss(x + y, t)) + robin_correction_quadrature(b.lambda, x + y, t)
            }
            _ => block_kernel(b.lambda, b.kind, x, y, t),
        };
        k += &b.vector * b.vector.adjoint() * C64::new(value, 0.0);
    }
    k
}
