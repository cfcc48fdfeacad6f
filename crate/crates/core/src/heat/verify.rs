use serde::{Deserialize, Serialize};

use super::fd::{heat_trace_numeric, FdGrid, FdProblem, NumericTrace};
use super::fit::{lim_extract, ExpansionFit};
use super::trace::{block_trace, closed_form_lim, halfline_heat_trace_with_error};
use super::{BoundaryKind, CutoffFunction, HeatTraceSamples, Provenance, TGrid};
use crate::error::{Error, Result};
use crate::invariants::{xi_invariant, HalfInt, MatrixPath};
use crate::linalg;
use crate::structure::{fredholm_pair_index, spectral_projection, DiracStructure, OrthoProjection, SpectralWindow};

/// Expansion order used for constant-term extraction.
pub const LIM_ORDER: usize = 6;

/// Accuracy required of a sign reading.
pub const S5_TOL: f64 = 1e-3;

impl TGrid {
    /// A grid short enough that `t ||A||^2` stays small and that the image terms
    /// have left the flat part of the cutoff at every sample.
    pub fn for_lim(norm: f64, flat: f64) -> Self {
        let t0 = 0.5f64.min(0.05 / (norm * norm).max(1e-300)).min(flat * flat / 40.0);
        TGrid { t0, rho: 0.65, count: 14 }
    }

    /// Grid for fits that carry log columns, whose design matrices are far
    /// worse conditioned. It starts lower and reaches about four decades further
    /// down, which keeps the log coefficients separable from the powers.
    pub fn for_log_fit(norm: f64, flat: f64) -> Self {
        let t0 = 0.002f64.min(0.002 / (norm * norm).max(1e-300)).min(flat * flat / 40.0);
        TGrid { t0, rho: 0.7, count: 28 }
    }
}

fn check_flat(phi: &CutoffFunction, grid: &TGrid) -> Result<()> {
    if phi.flat * phi.flat / grid.t0 < 30.0 {
        return Err(Error::Domain(format!(
            "cutoff must be flat on [0, d] with d^2 / t0 >= 30 (d = {}, t0 = {})",
            phi.flat, grid.t0
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignReading {
    /// `LIM = -xi(A+) + ind(P>=0(A+), P+)`.
    Minus,
    /// `LIM = +xi(A+) + ind(P>=0(A+), P+)`.
    Plus,
    /// Both readings agree (`xi(A+) = 0`) and match.
    Both,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S5Report {
    pub lim: f64,
    pub lim_error: f64,
    pub fit: ExpansionFit,
    pub closed_form: f64,
    pub xi_a_plus: HalfInt,
    pub pair_index: i64,
    pub minus_prediction: f64,
    pub plus_prediction: f64,
    pub minus_residual: f64,
    pub plus_residual: f64,
    pub verdict: SignReading,
    pub t_grid: TGrid,
}

/// Extracts the constant term of `tr[phi omega e^{-t D_P^2}]` and compares it
/// with `±xi(A+) + ind(P>=0(A+), P+)` on the `+1` eigenspace of `omega`.
///
/// Without an explicit grid, [`TGrid::for_lim`] is used.
pub fn verify_s5(s: &DiracStructure, p: &OrthoProjection, phi: &CutoffFunction, t_grid: Option<TGrid>) -> Result<S5Report> {
    s.omega().ok_or(Error::MissingGrading)?;
    let red = s.omega_reduce(Some(p))?;
    let p_plus = red.p_plus.expect("projection was supplied");
    let spec = red.a_plus.spectral()?;
    let nonneg = spectral_projection(&spec, &SpectralWindow::nonnegative());
    let pair_index = fredholm_pair_index(&nonneg, &p_plus)?;
    let xi_a_plus = xi_invariant(&red.a_plus)?;

    let norm = linalg::hermitian_norm(s.a_matrix())?;
    let grid = t_grid.unwrap_or_else(|| TGrid::for_lim(norm, phi.flat));
    check_flat(phi, &grid)?;
    let samples = HeatTraceSamples::sample(&grid, Provenance::ExactBlock, |t| halfline_heat_trace_with_error(s, p, phi, true, t))?;
    let fit = lim_extract(&samples, 0.5, LIM_ORDER, false)?;
    let closed_form = closed_form_lim(s, p, true)?;

    let minus_prediction = -xi_a_plus.to_f64() + pair_index as f64;
    let plus_prediction = xi_a_plus.to_f64() + pair_index as f64;
    let minus_residual = (fit.lim - minus_prediction).abs();
    let plus_residual = (fit.lim - plus_prediction).abs();
    let verdict = match (minus_residual <= S5_TOL, plus_residual <= S5_TOL) {
        (true, true) => SignReading::Both,
        (true, false) => SignReading::Minus,
        (false, true) => SignReading::Plus,
        (false, false) => SignReading::Neither,
    };
    Ok(S5Report {
        lim: fit.lim,
        lim_error: fit.lim_error,
        fit,
        closed_form,
        xi_a_plus,
        pair_index,
        minus_prediction,
        plus_prediction,
        minus_residual,
        plus_residual,
        verdict,
        t_grid: grid,
    })
}

/// Exact-block trace against the discretization at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub t: f64,
    pub exact: f64,
    pub exact_error: f64,
    pub numeric: NumericTrace,
    pub agrees: bool,
}

pub fn oracle_check(
    s: &DiracStructure,
    p: &OrthoProjection,
    phi: &CutoffFunction,
    insert_omega: bool,
    t: f64,
    grid: &FdGrid,
) -> Result<OracleCheck> {
    let (exact, exact_error) = halfline_heat_trace_with_error(s, p, phi, insert_omega, t)?;
    let problem = FdProblem::from_structure(s, p, insert_omega)?;
    let numeric = heat_trace_numeric(&problem, phi, t, grid, None)?;
    let agrees = (exact - numeric.value).abs() <= numeric.error_estimate + exact_error;
    Ok(OracleCheck { t, exact, exact_error, numeric, agrees })
}

/// What the expansion is fitted to.
#[derive(Debug, Clone, Copy)]
pub enum S8Input<'a> {
    /// Constant coefficients, exact block kernels.
    Structure(&'a DiracStructure),
    /// One scalar block `-d^2/dx^2 + lambda^2` with the given boundary condition.
    Block { lambda: f64, kind: BoundaryKind },
    /// Plateau family, discretized with `cells_per_unit` cells per unit length.
    Path { path: &'a MatrixPath, cells_per_unit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S8Fit {
    pub fit: ExpansionFit,
    /// Largest fitted `|a_{j1}|` with `j/2 - p <= 0`.
    pub low_order_log: f64,
    pub low_order_logs_vanish: bool,
    pub provenance: Provenance,
}

/// Tolerance under which fitted log coefficients count as absent.
pub const LOG_TOL: f64 = 1e-6;

/// Fits `tr[phi e^{-t D_P^2}] ~ sum a_{jk} t^{j/2 - 1/2} log^k t`.
pub fn expansion_fit_s8(
    input: S8Input<'_>,
    p: Option<&OrthoProjection>,
    phi: &CutoffFunction,
    t_grid: &TGrid,
    order: usize,
    include_logs: bool,
) -> Result<S8Fit> {
    check_flat(phi, t_grid)?;
    let (samples, provenance) = match input {
        S8Input::Structure(s) => {
            let p = p.ok_or_else(|| Error::Domain("a boundary projection is required".into()))?;
            let f = |t| halfline_heat_trace_with_error(s, p, phi, false, t);
            (HeatTraceSamples::sample(t_grid, Provenance::ExactBlock, f)?, Provenance::ExactBlock)
        }
        S8Input::Block { lambda, kind } => {
            let f = |t| Ok(block_trace(lambda, kind, phi, t));
            (HeatTraceSamples::sample(t_grid, Provenance::ExactBlock, f)?, Provenance::ExactBlock)
        }
        S8Input::Path { path, cells_per_unit } => {
            let p = p.ok_or_else(|| Error::Domain("a boundary projection is required".into()))?;
            let x0 = path
                .plateau()
                .ok_or_else(|| Error::Domain("variable coefficients need a plateau family".into()))?;
            let problem = FdProblem::from_path(path, p, None)?;
            let f = |t| {
                let grid = FdGrid::for_time(t, phi.support, Some(x0), cells_per_unit);
                let r = heat_trace_numeric(&problem, phi, t, &grid, None)?;
                Ok((r.value, r.error_estimate))
            };
            (HeatTraceSamples::sample(t_grid, Provenance::Discretized, f)?, Provenance::Discretized)
        }
    };
    let fit = lim_extract(&samples, 0.5, order, include_logs)?;
    let low_order_log = fit.max_low_order_log();
    Ok(S8Fit { low_order_logs_vanish: low_order_log <= LOG_TOL, low_order_log, fit, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_matrix, ComplexMatrix, I};
    use crate::structure::{aps_projection, validate_structure};
    use std::f64::consts::PI;

    fn running_example() -> DiracStructure {
        let gamma = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![I, -I]));
        let sx = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        validate_structure(gamma, sx.clone(), Some(sx), 1e-12).unwrap()
    }

    fn phi() -> CutoffFunction {
        CutoffFunction::smooth_bump(4.0, 6.0).unwrap()
    }

    #[test]
    fn running_example_matches_the_minus_reading() {
        let s = running_example();
        let p = aps_projection(&s).unwrap();
        let r = verify_s5(&s, &p, &phi(), None).unwrap();
        assert_eq!(r.xi_a_plus, HalfInt::from_twice(1));
        assert_eq!(r.pair_index, 0);
        assert!((r.lim + 0.5).abs() < 1e-6, "{}", r.lim);
        assert!((r.closed_form + 0.5).abs() < 1e-15);
        assert_eq!(r.verdict, SignReading::Minus);
    }

    #[test]
    fn missing_grading() {
        let s = running_example().without_grading();
        let p = aps_projection(&s).unwrap();
        assert!(matches!(verify_s5(&s, &p, &phi(), None), Err(Error::MissingGrading)));
    }

    #[test]
    fn oracle_agrees_on_running_example() {
        let s = running_example();
        let p = aps_projection(&s).unwrap();
        let c = oracle_check(&s, &p, &phi(), true, 0.5, &FdGrid::for_time(0.5, 6.0, None, 100)).unwrap();
        assert!(c.agrees, "{c:?}");
        assert!((c.exact - c.numeric.value).abs() < 1e-5);
    }

    #[test]
    fn dirichlet_block_coefficients() {
        let phi = phi();
        let grid = TGrid::for_log_fit(0.0, phi.flat);
        let r = expansion_fit_s8(S8Input::Block { lambda: 0.0, kind: BoundaryKind::Dirichlet }, None, &phi, &grid, 6, true).unwrap();
        let lead = phi.integral() / (4.0 * PI).sqrt();
        assert!((r.fit.coeff(0, 0) - lead).abs() < 1e-8 * lead);
        assert!((r.fit.lim + 0.25).abs() < 1e-5, "{}", r.fit.lim);
        assert!(r.low_order_logs_vanish, "{}", r.low_order_log);
    }

    #[test]
    fn aps_structure_has_no_logs() {
        let s = running_example();
        let p = aps_projection(&s).unwrap();
        let phi = phi();
        let grid = TGrid::for_log_fit(1.0, phi.flat);
        let r = expansion_fit_s8(S8Input::Structure(&s), Some(&p), &phi, &grid, 6, true).unwrap();
        assert!(r.low_order_logs_vanish, "{}", r.low_order_log);
        assert_eq!(r.provenance, Provenance::ExactBlock);
    }
}
