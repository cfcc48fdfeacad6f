//! Index of `d/dx + A(x)` on `[a, b]` with the conditions `P f(a) = 0`, `(I - Q) f(b) = 0`.

mod propagator;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use propagator::{propagate, Propagator, MAX_STEPS};
pub(crate) use propagator::{propagate_flow, Flow};
use propagator::{propagate_subspace, step_maps};

use crate::error::{Error, Result};
use crate::heat::{lim_extract, HeatTraceSamples, Provenance, TGrid};
use crate::invariants::{spectral_flow, xi_invariant, HalfInt, MatrixPath};
use crate::linalg::{self, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::quad;
use crate::structure::{fredholm_pair_index, spectral_projection, OrthoProjection, SpectralWindow};

/// Kernel and cokernel of the boundary problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryIndex {
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub index: i64,
    pub steps: usize,
}

/// `dim(U ∩ V)` for orthonormal bases `U`, `V`.
fn intersection_dim(u: &ComplexMatrix, v: &ComplexMatrix) -> usize {
    if u.ncols() == 0 || v.ncols() == 0 {
        return 0;
    }
    let mut m = ComplexMatrix::zeros(u.nrows(), u.ncols() + v.ncols());
    m.view_mut((0, 0), u.shape()).copy_from(u);
    m.view_mut((0, u.ncols()), v.shape()).copy_from(&(-v));
    linalg::nullity(&m, DEFAULT_RANK_TOL)
}

/// Kernel: solutions `f = T(x) f(a)` with `f(a) ∈ ker P` and `f(b) ∈ im Q`.
/// Cokernel: solutions of `g' = A g` with `g(a) ∈ im P` and `g(b) ∈ ker Q`.
pub fn interval_index(path: &MatrixPath, p: &OrthoProjection, q: &OrthoProjection, tol: f64) -> Result<BoundaryIndex> {
    let (a, b) = path.interval();
    interval_index_on(path, a, b, p, q, tol)
}

/// As [`interval_index`] on the subinterval `[a, b]`.
pub fn interval_index_on(path: &MatrixPath, a: f64, b: f64, p: &OrthoProjection, q: &OrthoProjection, tol: f64) -> Result<BoundaryIndex> {
    let n = path.dim();
    for proj in [p, q] {
        if proj.dim() != n {
            return Err(Error::dims(format!("dim {n}"), format!("dim {}", proj.dim())));
        }
    }
    let fwd = propagate_flow(path, a, b, tol, Flow::Forward)?;
    let adj = propagate_flow(path, a, b, tol, Flow::Adjoint)?;
    let steps = fwd.steps.max(adj.steps);

    let fwd_maps = step_maps(path, a, b, steps, Flow::Forward);
    let kernel_dim = intersection_dim(&propagate_subspace(&fwd_maps, &p.kernel_basis()), &q.range_basis());
    let adj_maps = step_maps(path, a, b, steps, Flow::Adjoint);
    let cokernel_dim = intersection_dim(&propagate_subspace(&adj_maps, &p.range_basis()), &q.kernel_basis());
    Ok(BoundaryIndex { kernel_dim, cokernel_dim, index: kernel_dim as i64 - cokernel_dim as i64, steps })
}

/// As [`interval_index_on`], allowing the empty segment `a = b` where the solution map is the identity.
pub fn segment_index(path: &MatrixPath, a: f64, b: f64, p: &OrthoProjection, q: &OrthoProjection, tol: f64) -> Result<BoundaryIndex> {
    if a != b {
        return interval_index_on(path, a, b, p, q, tol);
    }
    let n = path.dim();
    for proj in [p, q] {
        if proj.dim() != n {
            return Err(Error::dims(format!("dim {n}"), format!("dim {}", proj.dim())));
        }
    }
    let kernel_dim = intersection_dim(&p.kernel_basis(), &q.range_basis());
    let cokernel_dim = intersection_dim(&p.range_basis(), &q.kernel_basis());
    Ok(BoundaryIndex { kernel_dim, cokernel_dim, index: kernel_dim as i64 - cokernel_dim as i64, steps: 0 })
}

/// `-(1/sqrt(pi)) int_a^b LIM t^{1/2} tr[A'(x) e^{-t A(x)^2}] dx` with its error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralTerm {
    pub value: f64,
    pub error: f64,
    pub nodes: usize,
}

/// Order of the per-node fit.
const INTEGRAND_ORDER: usize = 8;

fn integrand_grid(norm: f64) -> TGrid {
    TGrid { t0: 0.5f64.min(0.01 / (norm * norm).max(1e-300)), rho: 0.65, count: 20 }
}

/// Constant term of `t^{1/2} tr[A'(x) e^{-t A(x)^2}]` at one point, with an error bar.
///
/// The model includes a `t^0` column so that the fit could detect one; the
/// error bar also covers the change from dropping the top order.
pub fn integrand_lim(path: &MatrixPath, x: f64, t_grid: Option<TGrid>) -> Result<(f64, f64)> {
    let (vals, vecs) = linalg::eigh(&path.eval(x))?;
    let da = path.derivative(x);
    let weights: Vec<f64> = (0..vals.len())
        .map(|k| {
            let v = vecs.column(k);
            (v.adjoint() * &da * v)[(0, 0)].re
        })
        .collect();
    if weights.iter().all(|w| *w == 0.0) {
        return Ok((0.0, 0.0));
    }
    let norm = vals.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let grid = t_grid.unwrap_or_else(|| integrand_grid(norm));
    let samples = HeatTraceSamples::sample(&grid, Provenance::ExactBlock, |t| {
        let v: f64 = vals.iter().zip(&weights).map(|(l, w)| w * (-t * l * l).exp()).sum::<f64>() * t.sqrt();
        Ok((v, 1e-16 * v.abs()))
    })?;
    let fine = lim_extract(&samples, 0.0, INTEGRAND_ORDER, false)?;
    let coarse = lim_extract(&samples, 0.0, INTEGRAND_ORDER - 1, false)?;
    Ok((fine.lim, fine.lim_error.max((fine.lim - coarse.lim).abs())))
}

/// Gauss-Legendre in `x` with 16 nodes, doubled until the value changes by less than `1e-8`.
pub fn integral_term(path: &MatrixPath, t_grid: Option<TGrid>) -> Result<IntegralTerm> {
    let (a, b) = path.interval();
    if path.is_constant() {
        return Ok(IntegralTerm { value: 0.0, error: 0.0, nodes: 0 });
    }
    let eval = |nodes: usize| -> Result<(f64, f64)> {
        let (xs, ws) = quad::gauss_legendre_on(nodes, a, b);
        let mut value = 0.0;
        let mut err = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            let (l, e) = integrand_lim(path, *x, t_grid)?;
            value += w * l;
            err += w.abs() * e;
        }
        Ok((-value / PI.sqrt(), err / PI.sqrt()))
    };
    let mut nodes = 16;
    let (mut value, mut err) = eval(nodes)?;
    loop {
        let (v2, e2) = eval(2 * nodes)?;
        let change = (v2 - value).abs();
        nodes *= 2;
        value = v2;
        err = e2.max(err) + change;
        if change < 1e-8 || nodes >= 256 {
            break;
        }
    }
    Ok(IntegralTerm { value, error: err, nodes })
}

/// Every constituent of the interval index formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub index: i64,
    pub sf: HalfInt,
    pub sf_crossings: Option<HalfInt>,
    pub pair_index_left: i64,
    pub pair_index_right: i64,
    pub xi_left: HalfInt,
    pub xi_right: HalfInt,
    pub integral_term: f64,
    pub integral_error: f64,
    pub line1_residual: f64,
    pub line2_residual: f64,
    pub line1_holds: bool,
    pub line2_holds: bool,
    pub steps: usize,
}

/// Grid used for the crossing tracker.
const FLOW_GRID: usize = 64;

pub fn verify_s7(path: &MatrixPath, p: &OrthoProjection, q: &OrthoProjection, tol: f64, t_grid: Option<TGrid>) -> Result<IndexReport> {
    let bi = interval_index(path, p, q, tol)?;
    let (a, b) = path.interval();
    let left = path.eval_op(a);
    let right = path.eval_op(b);
    let nonneg = SpectralWindow::nonnegative();
    let pair_index_left = fredholm_pair_index(&spectral_projection(&left.spectral()?, &nonneg), p)?;
    let pair_index_right = fredholm_pair_index(&spectral_projection(&right.spectral()?, &nonneg), q)?;
    let xi_left = xi_invariant(&left)?;
    let xi_right = xi_invariant(&right)?;
    let flow = spectral_flow(path, FLOW_GRID)?;
    let it = integral_term(path, t_grid)?;

    let integer_side = xi_right - xi_left + HalfInt::from_int(pair_index_left - pair_index_right);
    let line1_residual = (bi.index as f64 - (it.value + integer_side.to_f64())).abs();
    let line2 = flow.sf + HalfInt::from_int(pair_index_left - pair_index_right);
    let line2_residual = (HalfInt::from_int(bi.index) - line2).to_f64().abs();
    Ok(IndexReport {
        kernel_dim: bi.kernel_dim,
        cokernel_dim: bi.cokernel_dim,
        index: bi.index,
        sf: flow.sf,
        sf_crossings: flow.sf_crossings,
        pair_index_left,
        pair_index_right,
        xi_left,
        xi_right,
        integral_term: it.value,
        integral_error: it.error,
        line1_holds: line1_residual <= 1e-6 + it.error,
        line2_holds: line2_residual == 0.0 && flow.sf_crossings.is_none_or(|c| c == flow.sf),
        line1_residual,
        line2_residual,
        steps: bi.steps,
    })
}
