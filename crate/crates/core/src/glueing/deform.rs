use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DeformationFamily, DoubledStructure};
use crate::error::{Error, Result};
use crate::heat::{dense_spectrum, FdProblem};
use crate::linalg::{self, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::structure::{fredholm_pair_index, is_wellposed, spectral_projection, HermitianOperator, OrthoProjection, SpectralWindow};

/// Fixed discretization of `D_{P(theta)}^2` on `[0, x_max]` with `f(x_max) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S6Discretization {
    pub x_max: f64,
    pub cells: usize,
    /// How many of the lowest eigenvalues are tracked.
    pub eigenvalues: usize,
}

impl Default for S6Discretization {
    fn default() -> Self {
        S6Discretization { x_max: 3.0, cells: 60, eigenvalues: 8 }
    }
}

/// Above this value of `1 / sigma_min(P V_theta)` the boundary condition is
/// reported as close to the complementary one.
pub const DEGENERACY_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSample {
    pub theta: f64,
    pub wellposed: bool,
    pub gamma_residual: f64,
    pub pair_index: Option<i64>,
    pub eigenvalues: Vec<f64>,
    pub boundary_condition_number: f64,
}

/// Surrogate for graph continuity: eigenvalue continuity of one fixed discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S6Report {
    pub discretization: S6Discretization,
    pub samples: Vec<ThetaSample>,
    pub all_wellposed: bool,
    /// Largest `||P(theta_1) - P(theta_2)|| / |theta_1 - theta_2|` over neighbours.
    pub max_norm_ratio: f64,
    pub norm_continuity_holds: bool,
    pub pair_index_constant: Option<bool>,
    /// Largest eigenvalue slope seen on the midpoint-refined grid.
    pub lipschitz_estimate: f64,
    /// Same slope on the given grid alone; its ratio to the refined value shows whether the estimate has settled.
    pub coarse_lipschitz: f64,
    pub max_jump: f64,
    pub jumps_bounded: bool,
    pub degenerate_thetas: Vec<f64>,
}

impl S6Report {
    pub fn holds(&self) -> bool {
        self.all_wellposed && self.norm_continuity_holds && self.jumps_bounded && self.pair_index_constant != Some(false)
    }
}

/// Restriction of the doubled data to `ker(omega~ - I)`, without the `[P, A]` requirement of the ordinary reduction.
fn chiral(basis: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    basis.adjoint() * m * basis
}

fn spectrum(doubled: &DoubledStructure, p: &OrthoProjection, disc: &S6Discretization) -> Result<Vec<f64>> {
    let problem = FdProblem::constant(doubled.structure.a_matrix(), p, None)?;
    dense_spectrum(&problem, disc.x_max, disc.cells, disc.eigenvalues)
}

fn max_jump(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Checks the family generated by `p` on `theta_grid`: well-posedness of every
/// member, the norm bound `||P(s) - P(t)|| <= 2|s - t|`, constancy of the chiral
/// pair index, and eigenvalue jumps against a Lipschitz constant estimated on the
/// midpoint-refined grid.
pub fn verify_s6(doubled: &DoubledStructure, p: &OrthoProjection, theta_grid: &[f64], disc: &S6Discretization) -> Result<S6Report> {
    if theta_grid.is_empty() || theta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("theta grid must be non-empty and increasing".into()));
    }
    if disc.cells < 2 || disc.eigenvalues == 0 || !(disc.x_max > 0.0) {
        return Err(Error::DiscretizationFailure(format!("unusable discretization {disc:?}")));
    }
    let s = &doubled.structure;
    if !is_wellposed(p, s)?.is_wellposed() {
        return Err(Error::Domain("base projection is not well-posed for the doubled structure".into()));
    }
    let family = DeformationFamily::new(p, &doubled.tau, s.tol().max(p.tol()))?;

    let reduction = match s.omega() {
        Some(w) => {
            let (vals, mut vecs) = linalg::eigh(w)?;
            linalg::normalize_phases(&mut vecs);
            let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 0.0).collect();
            let basis = linalg::select_columns(&vecs, &keep);
            let a_plus = HermitianOperator::from_hermitian_part(&chiral(&basis, s.a_matrix()));
            let nonneg = spectral_projection(&a_plus.spectral()?, &SpectralWindow::nonnegative());
            Some((w.clone(), basis, nonneg))
        }
        None => None,
    };
    let base_range = p.range_basis();

    let sample = |theta: f64| -> Result<ThetaSample> {
        let pt = family.p_theta(theta)?;
        let wp = is_wellposed(&pt, s)?;
        let pair_index = match &reduction {
            Some((w, basis, nonneg)) => {
                let r = linalg::max_norm(&linalg::commutator(pt.matrix(), w));
                if r > s.tol() {
                    return Err(Error::CommutationViolation { what: "[P(theta), omega]", residual: r });
                }
                let p_plus = OrthoProjection::new(linalg::hermitian_part(&chiral(basis, pt.matrix())), s.tol().max(1e-10))?;
                Some(fredholm_pair_index(nonneg, &p_plus)?)
            }
            None => None,
        };
        // The member degenerates towards I - P as theta -> ±pi/2, where P no longer sees im P(theta).
        let overlap = base_range.adjoint() * pt.range_basis();
        let sv = overlap.singular_values();
        let smin = if sv.is_empty() { 1.0 } else { sv.min() };
        let boundary_condition_number = if smin > DEFAULT_RANK_TOL { 1.0 / smin } else { f64::INFINITY };
        Ok(ThetaSample {
            theta,
            wellposed: wp.is_wellposed(),
            gamma_residual: wp.gamma_residual,
            pair_index,
            eigenvalues: spectrum(doubled, &pt, disc)?,
            boundary_condition_number,
        })
    };
    let samples: Vec<ThetaSample> = theta_grid.par_iter().map(|&t| sample(t)).collect::<Result<_>>()?;
    let mids: Vec<f64> = theta_grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mid_spectra: Vec<Vec<f64>> = mids
        .par_iter()
        .map(|&t| spectrum(doubled, &family.p_theta(t)?, disc))
        .collect::<Result<_>>()?;

    let mut max_norm_ratio = 0.0f64;
    let mut coarse_lipschitz = 0.0f64;
    let mut lipschitz_estimate = 0.0f64;
    let mut jumps = Vec::with_capacity(mids.len());
    for (k, w) in samples.windows(2).enumerate() {
        let dt = w[1].theta - w[0].theta;
        let d = family.p_theta(w[1].theta)?.matrix() - family.p_theta(w[0].theta)?.matrix();
        max_norm_ratio = max_norm_ratio.max(linalg::hermitian_norm(&d)? / dt);
        let jump = max_jump(&w[0].eigenvalues, &w[1].eigenvalues);
        coarse_lipschitz = coarse_lipschitz.max(jump / dt);
        let left = max_jump(&w[0].eigenvalues, &mid_spectra[k]);
        let right = max_jump(&mid_spectra[k], &w[1].eigenvalues);
        lipschitz_estimate = lipschitz_estimate.max(2.0 * left.max(right) / dt);
        jumps.push((jump, dt));
    }
    // Rounding in the eigensolver, relative to the largest tracked eigenvalue.
    let floor = samples
        .iter()
        .flat_map(|s| s.eigenvalues.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        * 1e-10;
    let jumps_bounded = jumps.iter().all(|&(j, dt)| j <= lipschitz_estimate * dt + floor);
    let max_jump = jumps.iter().fold(0.0f64, |m, &(j, _)| m.max(j));
    let pair_index_constant = reduction
        .as_ref()
        .map(|_| samples.windows(2).all(|w| w[0].pair_index == w[1].pair_index));
    let degenerate_thetas = samples
        .iter()
        .filter(|s| s.boundary_condition_number > DEGENERACY_THRESHOLD)
        .map(|s| s.theta)
        .collect();
    Ok(S6Report {
        discretization: *disc,
        all_wellposed: samples.iter().all(|s| s.wellposed),
        norm_continuity_holds: max_norm_ratio <= 2.0 + 1e-12,
        max_norm_ratio,
        pair_index_constant,
        lipschitz_estimate,
        coarse_lipschitz,
        max_jump,
        jumps_bounded,
        degenerate_thetas,
        samples,
    })
}
