use serde::{Deserialize, Serialize};

use super::{fredholm_pair_index, pair_intersections, DiracStructure, OrthoProjection, SpectralWindow};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSymmetry {
    pub holds: bool,
    /// `max |gamma* P gamma - (I - P)|`
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionCheck {
    pub holds: bool,
    /// Smallest eigenvalue of `gamma* P gamma - (I - P)`.
    pub min_eigenvalue: f64,
}

fn check_dims(p: &OrthoProjection, s: &DiracStructure) -> Result<()> {
    if p.dim() != s.dim() {
        return Err(Error::dims(format!("dim {}", s.dim()), format!("dim {}", p.dim())));
    }
    Ok(())
}

fn symmetry_defect(p: &OrthoProjection, s: &DiracStructure) -> ComplexMatrix {
    let g = s.gamma();
    let n = s.dim();
    g.adjoint() * p.matrix() * g - (linalg::identity(n) - p.matrix())
}

pub fn is_gamma_symmetric(p: &OrthoProjection, s: &DiracStructure) -> Result<GammaSymmetry> {
    check_dims(p, s)?;
    let residual = linalg::max_norm(&symmetry_defect(p, s));
    Ok(GammaSymmetry { holds: residual <= s.tol(), residual })
}

/// Tests the ordering `I - P <= gamma* P gamma`.
pub fn symmetric_extension_check(p: &OrthoProjection, s: &DiracStructure) -> Result<ExtensionCheck> {
    check_dims(p, s)?;
    let min_eigenvalue = linalg::min_eigenvalue(&symmetry_defect(p, s))?;
    Ok(ExtensionCheck { holds: min_eigenvalue >= -s.tol(), min_eigenvalue })
}

/// Positive spectral projection of `A` plus a Lagrangian half of `ker A`.
///
/// The kernel part is spanned by `(u_j + v_j)/sqrt 2` where the `u_j` span
/// `ker A ∩ ker(gamma - i)`. Without a grading the `v_j` are the eigenvectors
/// of `i gamma` on `ker(gamma + i)` in spectral order; with a grading `omega`
/// they are `omega u_j`, which makes the result commute with `omega`.
pub fn aps_projection(s: &DiracStructure) -> Result<OrthoProjection> {
    let signature = s.kernel_signature()?;
    if signature != 0 {
        return Err(Error::NoGammaSymmetricProjection { signature });
    }
    let spec = s.spectral()?;
    let n = s.dim();
    let positive = spec.basis(&SpectralWindow::positive());
    let k = spec.kernel_basis();
    if k.ncols() == 0 {
        return Ok(OrthoProjection::from_orthonormal_basis(&positive, n));
    }

    let form = k.adjoint() * (s.gamma() * I) * &k;
    let (vals, mut coeffs) = linalg::eigh(&form)?;
    linalg::normalize_phases(&mut coeffs);
    let plus: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] < 0.0).collect();
    let minus: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] >= 0.0).collect();
    let u = &k * linalg::select_columns(&coeffs, &plus);
    let v = match s.omega() {
        Some(w) => w * &u,
        None => &k * linalg::select_columns(&coeffs, &minus),
    };
    let lagrangian = (u + v) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);

    let mut basis = ComplexMatrix::zeros(n, positive.ncols() + lagrangian.ncols());
    basis.columns_mut(0, positive.ncols()).copy_from(&positive);
    basis.columns_mut(positive.ncols(), lagrangian.ncols()).copy_from(&lagrangian);
    Ok(OrthoProjection::from_orthonormal_basis(&basis, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    WellPosed,
    /// Self-adjoint boundary condition whose pair with `P_+(A)` is the
    /// complementary one; its self-adjoint domain is strictly larger than the
    /// first-order domain.
    WellPosedComplementary,
    NotGammaSymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPosedness {
    pub gamma_symmetric: bool,
    pub gamma_residual: f64,
    /// `ind(P, P_+(A))`
    pub pair_index: i64,
    /// `dim(ker P_+ ∩ im P)`
    pub kernel_intersection: usize,
    /// `dim(ker P ∩ im P_+)`
    pub cokernel_intersection: usize,
    pub complementary_to_aps: bool,
    pub verdict: Verdict,
}

impl WellPosedness {
    pub fn is_wellposed(&self) -> bool {
        self.verdict != Verdict::NotGammaSymmetric
    }
}

pub fn is_wellposed(p: &OrthoProjection, s: &DiracStructure) -> Result<WellPosedness> {
    let aps = aps_projection(s)?;
    wellposed_against(p, s, &aps)
}

pub(crate) fn wellposed_against(p: &OrthoProjection, s: &DiracStructure, aps: &OrthoProjection) -> Result<WellPosedness> {
    let sym = is_gamma_symmetric(p, s)?;
    let inter = pair_intersections(p, aps)?;
    debug_assert_eq!(inter.index(), fredholm_pair_index(p, aps)?);
    let complementary = p.dim() > 0
        && linalg::max_norm(&(p.matrix() - aps.complement().matrix())) <= s.tol().max(p.tol());
    let verdict = if !sym.holds {
        Verdict::NotGammaSymmetric
    } else if complementary {
        Verdict::WellPosedComplementary
    } else {
        Verdict::WellPosed
    };
    Ok(WellPosedness {
        gamma_symmetric: sym.holds,
        gamma_residual: sym.residual,
        pair_index: inter.index(),
        kernel_intersection: inter.kernel,
        cokernel_intersection: inter.cokernel,
        complementary_to_aps: complementary,
        verdict,
    })
}
