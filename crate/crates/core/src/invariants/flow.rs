use serde::{Deserialize, Serialize};

use super::{xi_invariant, HalfInt, MatrixPath};
use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RANK_TOL};

/// An eigenvalue branch passing the zero threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub x: f64,
    /// Position of the branch in the ascending eigenvalue order.
    pub branch: usize,
    /// `+1` for a branch becoming nonnegative, `-1` for one becoming negative.
    pub dir: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    /// Endpoint value `xi(A(b)) - xi(A(a))`.
    pub sf: HalfInt,
    /// Signed crossing count, when the tracker finished.
    pub sf_crossings: Option<HalfInt>,
    pub crossings: Vec<Crossing>,
    pub crossings_complete: bool,
    pub xi_start: HalfInt,
    pub xi_end: HalfInt,
    pub method_agreement: bool,
    pub evaluations: usize,
}

impl FlowReport {
    /// Turns a partial crossing list into an error.
    pub fn require_complete(self, budget: usize) -> Result<Self> {
        if self.crossings_complete {
            Ok(self)
        } else {
            Err(Error::RefinementBudgetExceeded { budget })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub rank_tol: f64,
    /// Maximum number of eigenvalue evaluations for crossing tracking.
    pub budget: usize,
    /// Intervals shorter than `(b - a) * 2^-depth` are resolved as crossings.
    pub depth: i32,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { rank_tol: DEFAULT_RANK_TOL, budget: 200_000, depth: 32 }
    }
}

pub fn spectral_flow(path: &MatrixPath, grid: usize) -> Result<FlowReport> {
    spectral_flow_with(path, grid, FlowOptions::default())
}

struct Sample {
    x: f64,
    eig: Vec<f64>,
}

/// Spectral flow by the endpoint formula and by certified crossing tracking.
///
/// An eigenvalue counts as nonnegative when it is at least `-thr`, the kernel
/// threshold of the path. A subinterval `[l, r]` is certified free of
/// crossings when `L (r - l) < g(l) + g(r)` (with a rounding margin), where `L` bounds `||A'||` and
/// `g` is the distance of the spectrum to `-thr`. Uncertified intervals are
/// bisected down to the resolution limit, where a change of the nonnegative
/// count is recorded per branch.
pub fn spectral_flow_with(path: &MatrixPath, grid: usize, opts: FlowOptions) -> Result<FlowReport> {
    let (a, b) = path.interval();
    let xi_start = xi_invariant(&path.eval_op(a))?;
    let xi_end = xi_invariant(&path.eval_op(b))?;
    let sf = xi_end - xi_start;

    let scale = linalg::hermitian_norm(&path.eval(a))?.max(linalg::hermitian_norm(&path.eval(b))?);
    let thr = linalg::zero_threshold(opts.rank_tol, scale);
    let lip = path.lipschitz_bound(a, b);
    let h_min = (b - a) * 2f64.powi(-opts.depth);
    // Margin covering eigensolver rounding, so that a branch moving at exactly
    // the Lipschitz rate is never certified by accident.
    let slack = 64.0 * f64::EPSILON * (path.dim() as f64) * scale.max(1.0);

    let mut evaluations = 0usize;
    let sample = |x: f64, count: &mut usize| -> Result<Sample> {
        *count += 1;
        Ok(Sample { x, eig: linalg::eigvalsh(&path.eval(x))? })
    };
    let gap = |s: &Sample| s.eig.iter().fold(f64::INFINITY, |g, &l| g.min((l + thr).abs()));
    let nonneg = |s: &Sample| s.eig.iter().filter(|&&l| l >= -thr).count() as i64;

    let n = grid.max(1);
    let mut stack = Vec::new();
    let mut points = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
        points.push(sample(x, &mut evaluations)?);
    }
    let n_start = nonneg(&points[0]);
    let n_end = nonneg(&points[n]);
    for pair in points.windows(2).rev() {
        stack.push((Sample { x: pair[0].x, eig: pair[0].eig.clone() }, Sample { x: pair[1].x, eig: pair[1].eig.clone() }));
    }
    drop(points);

    let mut crossings = Vec::new();
    let mut agreement = true;
    let mut complete = true;
    while let Some((l, r)) = stack.pop() {
        let h = r.x - l.x;
        if lip * h * (1.0 + 1e-9) + slack < gap(&l) + gap(&r) {
            if nonneg(&l) != nonneg(&r) {
                agreement = false;
            }
            continue;
        }
        if h <= h_min {
            for (k, (&el, &er)) in l.eig.iter().zip(&r.eig).enumerate() {
                let (ql, qr) = (el >= -thr, er >= -thr);
                if ql != qr {
                    crossings.push(Crossing { x: 0.5 * (l.x + r.x), branch: k, dir: if qr { 1 } else { -1 } });
                }
            }
            continue;
        }
        if evaluations >= opts.budget {
            complete = false;
            break;
        }
        let m = sample(0.5 * (l.x + r.x), &mut evaluations)?;
        let m2 = Sample { x: m.x, eig: m.eig.clone() };
        stack.push((m2, r));
        stack.push((l, m));
    }

    let counted: i64 = crossings.iter().map(|c| c.dir as i64).sum();
    let sf_crossings = complete.then(|| HalfInt::from_int(counted));
    if complete {
        agreement &= counted == n_end - n_start && Some(sf) == sf_crossings;
    }
    Ok(FlowReport {
        sf,
        sf_crossings,
        crossings,
        crossings_complete: complete,
        xi_start,
        xi_end,
        method_agreement: agreement,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{PathTerm, TermKind};
    use crate::linalg::diag_real;

    fn affine(a0: &[f64], a1: &[f64], a: f64, b: f64) -> MatrixPath {
        MatrixPath::affine(&diag_real(a0), &diag_real(a1), a, b).unwrap()
    }

    #[test]
    fn two_upward_crossings() {
        let r = spectral_flow(&affine(&[0.0, -1.0], &[1.0, 1.0], -1.0, 2.0), 8).unwrap();
        assert_eq!(r.sf, HalfInt::from_int(2));
        assert!(r.method_agreement && r.crossings_complete);
        assert_eq!(r.crossings.len(), 2);
        let mut xs: Vec<f64> = r.crossings.iter().map(|c| c.x).collect();
        xs.sort_by(f64::total_cmp);
        assert!(xs[0].abs() < 1e-7 && (xs[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn scalar_crossing() {
        let r = spectral_flow(&affine(&[0.0], &[1.0], -1.0, 1.0), 4).unwrap();
        assert_eq!(r.sf, HalfInt::from_int(1));
        assert_eq!(r.crossings, vec![Crossing { x: r.crossings[0].x, branch: 0, dir: 1 }]);
        assert!(r.method_agreement);
    }

    #[test]
    fn endpoint_kernel_contributes_nothing() {
        let r = spectral_flow(&affine(&[0.0], &[1.0], 0.0, 1.0), 4).unwrap();
        assert_eq!(r.xi_start, HalfInt::from_twice(1));
        assert_eq!(r.xi_end, HalfInt::from_twice(1));
        assert_eq!(r.sf, HalfInt::ZERO);
        assert_eq!(r.sf_crossings, Some(HalfInt::ZERO));
        assert!(r.method_agreement && r.crossings.is_empty());
    }

    #[test]
    fn downward_at_right_endpoint() {
        // x -> -x on [-1, 0] ends in the kernel, which counts as nonnegative.
        let r = spectral_flow(&affine(&[0.0], &[-1.0], -1.0, 0.0), 4).unwrap();
        assert_eq!(r.sf, HalfInt::ZERO);
        assert!(r.method_agreement);
        let r = spectral_flow(&affine(&[0.0], &[-1.0], -1.0, 1.0), 4).unwrap();
        assert_eq!(r.sf, HalfInt::from_int(-1));
        assert_eq!(r.crossings[0].dir, -1);
    }

    #[test]
    fn identically_zero_branch_exhausts_budget() {
        let r = spectral_flow_with(
            &affine(&[0.0, 0.0], &[0.0, 1.0], -1.0, 1.0),
            4,
            FlowOptions { budget: 5_000, ..FlowOptions::default() },
        )
        .unwrap();
        assert!(!r.crossings_complete);
        assert_eq!(r.sf, HalfInt::from_int(1));
        assert!(r.sf_crossings.is_none());
        assert!(matches!(r.require_complete(5_000), Err(Error::RefinementBudgetExceeded { .. })));
    }

    #[test]
    fn tangential_touch_is_not_a_crossing() {
        let p = MatrixPath::new(-1.0, 1.0, vec![PathTerm::new(TermKind::Poly, 2.0, diag_real(&[1.0]))], None).unwrap();
        let r = spectral_flow(&p, 3).unwrap();
        assert_eq!(r.sf, HalfInt::ZERO);
        assert!(r.method_agreement && r.crossings.is_empty());
    }

    #[test]
    fn oscillating_trig_branch() {
        // sin(3x) on [0.1, 6] vanishes at k pi / 3 for k = 1..5.
        let p = MatrixPath::new(0.1, 6.0, vec![PathTerm::new(TermKind::Sin, 3.0, diag_real(&[1.0]))], None).unwrap();
        let r = spectral_flow(&p, 5).unwrap();
        assert!(r.method_agreement);
        assert_eq!(r.crossings.len(), 5);
        // sin(0.3) > 0, sin(18) < 0.
        assert_eq!(r.sf, HalfInt::from_int(-1));
    }
}
