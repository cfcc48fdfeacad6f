use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::MatrixPath;
use crate::linalg::{self, ComplexMatrix, C64};

/// Solution map `f(b) = T f(a)` of `f' = -A(x) f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: ComplexMatrix,
    pub steps: usize,
    pub error_estimate: f64,
}

/// Largest step count tried before giving up.
pub const MAX_STEPS: usize = 1 << 16;

/// Direction of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum Flow {
    /// `f' = -A f`.
    Forward,
    /// `g' = +A g`, the adjoint equation.
    Adjoint,
}

fn check_range(path: &MatrixPath, a: f64, b: f64) -> Result<()> {
    let (lo, hi) = path.interval();
    let slack = 1e-12 * (hi - lo).abs().max(1.0);
    if !(a >= lo - slack && b <= hi + slack && a < b) {
        return Err(Error::Domain(format!("[{a}, {b}] is not a subinterval of [{lo}, {hi}]")));
    }
    Ok(())
}

/// One fourth-order Magnus step on `[x, x + h]` with two Gauss nodes.
fn magnus_step(path: &MatrixPath, x: f64, h: f64, flow: Flow) -> ComplexMatrix {
    let c = 3f64.sqrt() / 6.0;
    let sign = match flow {
        Flow::Forward => -1.0,
        Flow::Adjoint => 1.0,
    };
    let b1 = path.eval(x + (0.5 - c) * h) * C64::new(sign, 0.0);
    let b2 = path.eval(x + (0.5 + c) * h) * C64::new(sign, 0.0);
    let omega = (&b1 + &b2) * C64::new(0.5 * h, 0.0) + linalg::commutator(&b2, &b1) * C64::new(c * 0.5 * h * h, 0.0);
    omega.exp()
}

pub(crate) fn step_maps(path: &MatrixPath, a: f64, b: f64, steps: usize, flow: Flow) -> Vec<ComplexMatrix> {
    let h = (b - a) / steps as f64;
    (0..steps).map(|k| magnus_step(path, a + k as f64 * h, h, flow)).collect()
}

fn product(maps: &[ComplexMatrix], n: usize) -> ComplexMatrix {
    maps.iter().fold(linalg::identity(n), |acc, m| m * acc)
}

fn initial_steps(path: &MatrixPath, a: f64, b: f64) -> usize {
    let scale = path.lipschitz_bound(a, b).max(linalg::max_norm(&path.eval(a))).max(1.0);
    ((b - a) * scale).ceil().clamp(4.0, 1024.0) as usize
}

/// Propagator over `[a, b]`, doubling the step count until two successive
/// results differ by less than `tol` relative to `||T||`.
pub fn propagate(path: &MatrixPath, a: f64, b: f64, tol: f64) -> Result<Propagator> {
    propagate_flow(path, a, b, tol, Flow::Forward)
}

pub(crate) fn propagate_flow(path: &MatrixPath, a: f64, b: f64, tol: f64, flow: Flow) -> Result<Propagator> {
    check_range(path, a, b)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = path.dim();
    let mut steps = initial_steps(path, a, b);
    let mut coarse = product(&step_maps(path, a, b, steps, flow), n);
    let mut estimate = f64::INFINITY;
    while 2 * steps <= MAX_STEPS {
        steps *= 2;
        let fine = product(&step_maps(path, a, b, steps, flow), n);
        // Fourth order: the fine result is off by about a fifteenth of the difference.
        estimate = linalg::max_norm(&(&fine - &coarse)) / 15.0 / linalg::max_norm(&fine).max(1e-300);
        linalg::check_finite(&fine, "propagator")?;
        if estimate < tol {
            return Ok(Propagator { matrix: fine, steps, error_estimate: estimate });
        }
        coarse = fine;
    }
    Err(Error::ToleranceUnreachable { tol, steps, estimate })
}

/// Orthonormal basis of `T span(basis)`, re-orthonormalized after every step
/// so that growing and decaying directions stay resolved.
pub(crate) fn propagate_subspace(maps: &[ComplexMatrix], basis: &ComplexMatrix) -> ComplexMatrix {
    if basis.ncols() == 0 {
        return basis.clone();
    }
    let mut w = linalg::orthonormalize(basis);
    for m in maps {
        w = linalg::orthonormalize(&(m * &w));
    }
    w
}
