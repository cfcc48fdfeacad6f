//! Finite-difference discretization of `D_P^2` on `[0, X]`, used as an
//! independent oracle for the closed-form block kernels.
//!
//! The quadratic form `int |f' + A f|^2` is discretized with the box scheme
//! `(f_{j+1} - f_j)/h + A_{j+1/2} (f_j + f_{j+1})/2` and a lumped mass matrix.
//! The essential condition `P f(0) = 0` is imposed on the unknowns; the
//! complementary condition `(I - P)(f' + A f)(0) = 0` is then natural.
//! `f(X) = 0` closes the far end.

use serde::{Deserialize, Serialize};

use super::normal::joint_components;
use super::CutoffFunction;
use crate::error::{Error, Result};
use crate::invariants::MatrixPath;
use crate::linalg::{self, ComplexMatrix, C64};
use crate::structure::{is_gamma_symmetric, DiracStructure, OrthoProjection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    /// Far end `X` of the truncated half-line.
    pub x_max: f64,
    /// Number of cells on the coarse grid; the fine grid doubles it.
    pub n_points: usize,
}

impl FdGrid {
    /// Smallest admissible grid for time `t`, cutoff support and plateau.
    pub fn for_time(t: f64, support: f64, plateau: Option<f64>, cells_per_unit: usize) -> Self {
        let x_max = (min_extent(t, support, plateau) + 1.0).ceil();
        FdGrid { x_max, n_points: cells_per_unit.max(50) * x_max as usize }
    }
}

fn min_extent(t: f64, support: f64, plateau: Option<f64>) -> f64 {
    support.max(plateau.unwrap_or(0.0)) + 6.0 * t.sqrt() * (1.0 + (1.0 / t).ln().max(0.0))
}

#[derive(Debug, Clone)]
enum Coefficient {
    Constant(ComplexMatrix),
    Path(MatrixPath),
}

/// The operator `D_P^2` data: potential, boundary projection and trace weight.
#[derive(Debug, Clone)]
pub struct FdProblem {
    coeff: Coefficient,
    p: OrthoProjection,
    weight: Option<ComplexMatrix>,
}

impl FdProblem {
    /// Constant coefficients from a structure; `insert_omega` weights the trace by the grading.
    pub fn from_structure(s: &DiracStructure, p: &OrthoProjection, insert_omega: bool) -> Result<Self> {
        if p.dim() != s.dim() {
            return Err(Error::dims(format!("dim {}", s.dim()), format!("dim {}", p.dim())));
        }
        let sym = is_gamma_symmetric(p, s)?;
        if !sym.holds {
            return Err(Error::StructureViolation { identity: "gamma* P gamma - (I - P)", residual: sym.residual, tol: s.tol() });
        }
        let weight = if insert_omega {
            let w = s.omega().ok_or(Error::MissingGrading)?;
            let res = linalg::max_norm(&linalg::commutator(p.matrix(), w));
            if res > s.tol() {
                return Err(Error::CommutationViolation { what: "[P, omega]", residual: res });
            }
            Some(w.clone())
        } else {
            None
        };
        Ok(FdProblem { coeff: Coefficient::Constant(s.a_matrix().clone()), p: p.clone(), weight })
    }

    /// Variable coefficients `A(x)` from a path; the far part uses `A(x)` evaluated past the interval.
    pub fn from_path(path: &MatrixPath, p: &OrthoProjection, weight: Option<&ComplexMatrix>) -> Result<Self> {
        if p.dim() != path.dim() {
            return Err(Error::dims(format!("dim {}", path.dim()), format!("dim {}", p.dim())));
        }
        Ok(FdProblem { coeff: Coefficient::Path(path.clone()), p: p.clone(), weight: weight.cloned() })
    }

    pub fn constant(a: &ComplexMatrix, p: &OrthoProjection, weight: Option<&ComplexMatrix>) -> Result<Self> {
        linalg::require_square(a, p.dim())?;
        Ok(FdProblem { coeff: Coefficient::Constant(a.clone()), p: p.clone(), weight: weight.cloned() })
    }

    fn dim(&self) -> usize {
        self.p.dim()
    }

    fn plateau(&self) -> Option<f64> {
        match &self.coeff {
            Coefficient::Constant(_) => None,
            Coefficient::Path(p) => Some(p.plateau().unwrap_or(p.interval().1)),
        }
    }

    fn coefficient_matrices(&self) -> Vec<&ComplexMatrix> {
        match &self.coeff {
            Coefficient::Constant(a) => vec![a],
            Coefficient::Path(p) => p.terms().iter().map(|t| &t.matrix).collect(),
        }
    }

    fn eval(&self, x: f64) -> ComplexMatrix {
        match &self.coeff {
            Coefficient::Constant(a) => a.clone(),
            Coefficient::Path(p) => p.eval(x),
        }
    }

    /// Scalar potential `lambda(x)` of a joint eigencomponent with per-matrix eigenvalues `values`.
    fn scalar_potential(&self, values: &[f64]) -> Box<dyn Fn(f64) -> f64 + '_> {
        match &self.coeff {
            Coefficient::Constant(_) => {
                let l = values[0];
                Box::new(move |_| l)
            }
            Coefficient::Path(path) => {
                let values = values.to_vec();
                Box::new(move |x| path.eval_scalar(&values, x))
            }
        }
    }
}

/// Result of a discretized trace: Richardson-extrapolated value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericTrace {
    pub value: f64,
    pub error_estimate: f64,
    pub coarse: f64,
    pub fine: f64,
}

fn check_grid(t: f64, phi: &CutoffFunction, plateau: Option<f64>, grid: &FdGrid) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat trace needs t > 0, got {t}")));
    }
    let need = min_extent(t, phi.support, plateau);
    if grid.x_max < need {
        return Err(Error::Domain(format!("grid end {} must be at least {need:.3}", grid.x_max)));
    }
    if (grid.n_points as f64) < 50.0 * grid.x_max {
        return Err(Error::Domain(format!("{} cells on [0, {}] is fewer than 50 X", grid.n_points, grid.x_max)));
    }
    Ok(())
}

/// Discretized `tr[phi W e^{-t D_P^2}]` with a Richardson error estimate from grids `n` and `2n`.
///
/// The estimate adds the per-block Richardson terms in absolute value, so that
/// blocks of opposite weight cannot cancel each other's errors, plus the
/// rounding level of the eigenvalue sums.
///
/// `tol`, when given, turns an estimate above it into `GridTooCoarse`.
pub fn heat_trace_numeric(problem: &FdProblem, phi: &CutoffFunction, t: f64, grid: &FdGrid, tol: Option<f64>) -> Result<NumericTrace> {
    check_grid(t, phi, problem.plateau(), grid)?;
    let coarse_parts = trace_parts(problem, phi, t, grid.x_max, grid.n_points)?;
    let fine_parts = trace_parts(problem, phi, t, grid.x_max, 2 * grid.n_points)?;
    let coarse: f64 = coarse_parts.iter().map(|(w, v)| w * v).sum();
    let fine: f64 = fine_parts.iter().map(|(w, v)| w * v).sum();
    let unknowns = (2 * grid.n_points * problem.dim()) as f64;
    let error_estimate: f64 = coarse_parts
        .iter()
        .zip(&fine_parts)
        .map(|((w, c), (_, f))| w.abs() * ((f - c).abs() / 3.0 + 8.0 * unknowns * f64::EPSILON * f.abs()))
        .sum();
    if let Some(tol) = tol {
        if error_estimate > tol {
            return Err(Error::GridTooCoarse { estimate: error_estimate, tol });
        }
    }
    Ok(NumericTrace { value: fine + (fine - coarse) / 3.0, error_estimate, coarse, fine })
}

/// Single-grid trace (no extrapolation).
pub fn trace_on_grid(problem: &FdProblem, phi: &CutoffFunction, t: f64, x_max: f64, cells: usize) -> Result<f64> {
    Ok(trace_parts(problem, phi, t, x_max, cells)?.iter().map(|(w, v)| w * v).sum())
}

/// `(weight, trace)` per scalar block, or a single unit-weight part for the dense fallback.
fn trace_parts(problem: &FdProblem, phi: &CutoffFunction, t: f64, x_max: f64, cells: usize) -> Result<Vec<(f64, f64)>> {
    let mu_cut = 41.0 / t;
    match joint_components(&problem.coefficient_matrices(), problem.p.matrix()) {
        Ok(comps) => {
            let mut parts = Vec::with_capacity(comps.len());
            for c in comps {
                let w = match &problem.weight {
                    Some(op) => (c.vector.adjoint() * op * &c.vector)[(0, 0)].re,
                    None => 1.0,
                };
                if w.abs() < 1e-14 {
                    continue;
                }
                let lam = problem.scalar_potential(&c.values);
                let sys = ScalarSystem::assemble(&*lam, c.in_range, x_max, cells);
                let pairs = sys.eigenpairs_below(mu_cut)?;
                let phis: Vec<f64> = sys.nodes.iter().map(|&x| phi.eval(x)).collect();
                let mut acc = 0.0;
                for (mu, y) in &pairs {
                    let local: f64 = y.iter().zip(&phis).map(|(v, f)| f * v * v).sum();
                    acc += (-t * mu).exp() * local;
                }
                parts.push((w, acc));
            }
            Ok(parts)
        }
        Err(Error::NormalForm(_)) => Ok(vec![(1.0, dense_trace(problem, phi, t, x_max, cells)?)]),
        Err(e) => Err(e),
    }
}

/// Discretized kernel `k(x, y, t)` (Richardson-extrapolated) at grid nodes, constant coefficients only.
pub fn kernel_numeric(problem: &FdProblem, x: f64, y: f64, t: f64, grid: &FdGrid) -> Result<(ComplexMatrix, f64)> {
    if !matches!(problem.coeff, Coefficient::Constant(_)) {
        return Err(Error::Domain("kernel oracle supports constant coefficients only".into()));
    }
    let h = grid.x_max / grid.n_points as f64;
    let (ix, iy) = ((x / h).round(), (y / h).round());
    if (ix * h - x).abs() > 1e-9 * h.max(x) || (iy * h - y).abs() > 1e-9 * h.max(y) {
        return Err(Error::Domain(format!("({x}, {y}) must be coarse grid nodes (h = {h})")));
    }
    let coarse = kernel_on_grid(problem, ix as usize, iy as usize, t, grid.x_max, grid.n_points)?;
    let fine = kernel_on_grid(problem, 2 * ix as usize, 2 * iy as usize, t, grid.x_max, 2 * grid.n_points)?;
    let est = linalg::max_norm(&(&fine - &coarse)) / 3.0;
    Ok((&fine + (&fine - coarse) / C64::new(3.0, 0.0), est))
}

fn kernel_on_grid(problem: &FdProblem, ix: usize, iy: usize, t: f64, x_max: f64, cells: usize) -> Result<ComplexMatrix> {
    let comps = joint_components(&problem.coefficient_matrices(), problem.p.matrix())?;
    let n = problem.dim();
    let mut k = ComplexMatrix::zeros(n, n);
    for c in comps {
        let lam = problem.scalar_potential(&c.values);
        let sys = ScalarSystem::assemble(&*lam, c.in_range, x_max, cells);
        let pairs = sys.eigenpairs_below(41.0 / t)?;
        let (ux, uy) = (sys.nodal_value_index(ix), sys.nodal_value_index(iy));
        let mut v = 0.0;
        for (mu, y) in &pairs {
            let fx = ux.map_or(0.0, |i| y[i] / sys.mass[i].sqrt());
            let fy = uy.map_or(0.0, |i| y[i] / sys.mass[i].sqrt());
            v += (-t * mu).exp() * fx * fy;
        }
        k += &c.vector * c.vector.adjoint() * C64::new(v, 0.0);
    }
    Ok(k)
}

/// Symmetric tridiagonal `M^{-1/2} K M^{-1/2}` for one scalar block.
struct ScalarSystem {
    diag: Vec<f64>,
    off: Vec<f64>,
    mass: Vec<f64>,
    nodes: Vec<f64>,
    /// Grid index of the first unknown (1 for Dirichlet, 0 otherwise).
    first: usize,
}

impl ScalarSystem {
    fn assemble(lambda: &dyn Fn(f64) -> f64, dirichlet: bool, x_max: f64, cells: usize) -> Self {
        let h = x_max / cells as f64;
        // Full system on nodes 0..cells-1 (node `cells` carries f = 0).
        let n = cells;
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1)];
        for j in 0..n {
            let a = lambda((j as f64 + 0.5) * h);
            let alpha = -1.0 / h + 0.5 * a;
            let beta = 1.0 / h + 0.5 * a;
            d[j] += h * alpha * alpha;
            if j + 1 < n {
                d[j + 1] += h * beta * beta;
                e[j] += h * alpha * beta;
            }
        }
        let mut mass = vec![h; n];
        mass[0] = 0.5 * h;
        let first = usize::from(dirichlet);
        let d = d[first..].to_vec();
        let e = e[first..].to_vec();
        let mass = mass[first..].to_vec();
        let nodes: Vec<f64> = (first..n).map(|j| j as f64 * h).collect();
        let diag = d.iter().zip(&mass).map(|(v, m)| v / m).collect();
        let off = e.iter().enumerate().map(|(i, v)| v / (mass[i] * mass[i + 1]).sqrt()).collect();
        ScalarSystem { diag, off, mass, nodes, first }
    }

    fn nodal_value_index(&self, grid_index: usize) -> Option<usize> {
        (grid_index >= self.first && grid_index - self.first < self.diag.len()).then(|| grid_index - self.first)
    }

    /// Number of eigenvalues below `mu` (Sturm sequence).
    fn count_below(&self, mu: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - mu;
        let tiny = f64::MIN_POSITIVE.sqrt();
        for i in 0..self.diag.len() {
            if i > 0 {
                let prev = if q.abs() < tiny { tiny.copysign(q) } else { q };
                q = self.diag[i] - mu - self.off[i - 1] * self.off[i - 1] / prev;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Eigenpairs with eigenvalue below `mu_cut`; vectors are unit-norm in the scaled system.
    fn eigenpairs_below(&self, mu_cut: f64) -> Result<Vec<(f64, Vec<f64>)>> {
        let (lo, hi) = self.gershgorin();
        let m = self.count_below(mu_cut.min(hi + 1.0));
        let mut out = Vec::with_capacity(m);
        for k in 0..m {
            // k-th eigenvalue: the smallest mu with count_below(mu) > k.
            let (mut a, mut b) = (lo - 1.0, mu_cut.min(hi + 1.0));
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if self.count_below(mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
                    break;
                }
            }
            let mu = 0.5 * (a + b);
            out.push((mu, self.inverse_iteration(mu)?));
        }
        Ok(out)
    }

    fn inverse_iteration(&self, mu: f64) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut y: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        let scale = self.diag.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for _ in 0..3 {
            let sub = self.off.clone();
            let sup = self.off.clone();
            let d: Vec<f64> = self.diag.iter().map(|v| v - mu).collect();
            tridiagonal_solve(sub, d, sup, &mut y, f64::EPSILON * scale);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::DiscretizationFailure("inverse iteration broke down".into()));
            }
            y.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(y)
    }
}

/// Solves a tridiagonal system with partial pivoting, in place in `b`.
/// Zero pivots are replaced by `tiny`, which is what inverse iteration needs.
fn tridiagonal_solve(mut dl: Vec<f64>, mut d: Vec<f64>, mut du: Vec<f64>, b: &mut [f64], tiny: f64) {
    let n = d.len();
    if n == 1 {
        let p = if d[0].abs() < tiny { tiny } else { d[0] };
        b[0] /= p;
        return;
    }
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i].abs() < tiny {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
        dl[i] = 0.0;
    }
    if d[n - 1].abs() < tiny {
        d[n - 1] = tiny;
    }
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
}

/// Dense matrix `M^{-1/2} K M^{-1/2}` on the unknowns `(c, f_1, .., f_{N-1})`, where `f_0 = Z c`
/// with `Z` an orthonormal basis of `ker P`. Returns the matrix and `Z`.
fn dense_operator(problem: &FdProblem, x_max: f64, cells: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = problem.dim();
    let z = problem.p.kernel_basis();
    let r = z.ncols();
    let size = r + (cells - 1) * n;
    if size > 3000 {
        return Err(Error::DiscretizationFailure(format!("coupled system of size {size} is too large for the dense oracle")));
    }
    let h = x_max / cells as f64;
    // K = B* B, where block row j of B touches the unknowns of nodes j and j + 1 only.
    let mut k = ComplexMatrix::zeros(size, size);
    let sh = h.sqrt();
    let id = linalg::identity(n);
    for j in 0..cells {
        let a = problem.eval((j as f64 + 0.5) * h);
        let left = (&id * C64::new(-1.0 / h, 0.0) + &a * C64::new(0.5, 0.0)) * C64::new(sh, 0.0);
        let right = (&id * C64::new(1.0 / h, 0.0) + &a * C64::new(0.5, 0.0)) * C64::new(sh, 0.0);
        let (col, left) = if j == 0 { (0, &left * &z) } else { (r + (j - 1) * n, left) };
        let width = left.ncols() + if j + 1 < cells { n } else { 0 };
        let mut row = ComplexMatrix::zeros(n, width);
        row.view_mut((0, 0), (n, left.ncols())).copy_from(&left);
        if j + 1 < cells {
            row.view_mut((0, left.ncols()), (n, n)).copy_from(&right);
        }
        let mut block = k.view_mut((col, col), (width, width));
        block += row.adjoint() * &row;
    }
    // Mass: Z* (h/2) Z = h/2 on node 0, h elsewhere.
    let mut inv_sqrt_m = vec![(2.0 / h).sqrt(); r];
    inv_sqrt_m.extend(std::iter::repeat_n((1.0 / h).sqrt(), size - r));
    for i in 0..size {
        for j in 0..size {
            k[(i, j)] *= inv_sqrt_m[i] * inv_sqrt_m[j];
        }
    }
    Ok((k, z))
}

/// Lowest `count` eigenvalues of the discretized `D_P^2` on `[0, x_max]`.
///
/// The operator couples neighbouring nodes only, so the matrix is banded and
/// the eigenvalues are found by bisection on inertia counts from a banded
/// `L D L*` factorization. A full eigendecomposition is used when most of the
/// spectrum is requested.
pub fn dense_spectrum(problem: &FdProblem, x_max: f64, cells: usize, count: usize) -> Result<Vec<f64>> {
    let (k, _) = dense_operator(problem, x_max, cells)?;
    let size = k.nrows();
    if 4 * count >= size {
        let mut mus = linalg::eigvalsh(&k)?;
        mus.truncate(count);
        return Ok(mus);
    }
    let band = Band::from_dense(&k);
    let (lo, hi) = band.gershgorin();
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let tol = 16.0 * f64::EPSILON * scale;

    // lower[i] < mu_i <= upper[i], with the eigenvalue counts below each end.
    // Every count narrows all brackets at once.
    let mut lower = vec![(lo - 1.0, 0usize); count];
    let mut upper = vec![(hi + 1.0, size); count];
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let isolated = |l: &(f64, usize), u: &(f64, usize)| l.1 == i && u.1 == i + 1;
        while upper[i].0 - lower[i].0 > tol
            && !(isolated(&lower[i], &upper[i]) && upper[i].0 - lower[i].0 < 1e-3 * scale)
        {
            let mid = 0.5 * (lower[i].0 + upper[i].0);
            let below = band.factor(mid).negatives;
            for (j, (l, u)) in lower.iter_mut().zip(upper.iter_mut()).enumerate() {
                if below > j {
                    if mid < u.0 {
                        *u = (mid, below);
                    }
                } else if mid > l.0 {
                    *l = (mid, below);
                }
            }
        }
        let (l, u) = (lower[i].0, upper[i].0);
        let mu = if isolated(&lower[i], &upper[i]) && u - l > tol {
            band.rayleigh(l, u, tol).unwrap_or_else(|| band.bisect(l, u, i, tol))
        } else {
            0.5 * (l + u)
        };
        out.push(mu);
    }
    Ok(out)
}

/// Lower band of a Hermitian matrix: `rows[i][d] = K[i][i - d]` for `d <= width`.
struct Band {
    width: usize,
    rows: Vec<Vec<C64>>,
}

/// `K - sigma = L D L*` with unit lower `L` stored like `Band::rows`.
struct Ldl {
    l: Vec<Vec<C64>>,
    piv: Vec<f64>,
    negatives: usize,
}

impl Band {
    fn from_dense(k: &ComplexMatrix) -> Self {
        let n = k.nrows();
        let mut width = 0;
        for j in 0..n {
            for i in (j + 1)..n {
                if k[(i, j)] != C64::new(0.0, 0.0) {
                    width = width.max(i - j);
                }
            }
        }
        let rows = (0..n).map(|i| (0..=width.min(i)).map(|d| k[(i, i - d)]).collect()).collect();
        Band { width, rows }
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.rows.len();
        let mut radius = vec![0.0; n];
        for (i, row) in self.rows.iter().enumerate() {
            for (d, v) in row.iter().enumerate().skip(1) {
                radius[i] += v.norm();
                radius[i - d] += v.norm();
            }
        }
        let lo = (0..n).map(|i| self.rows[i][0].re - radius[i]).fold(f64::INFINITY, f64::min);
        let hi = (0..n).map(|i| self.rows[i][0].re + radius[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (i, row) in self.rows.iter().enumerate() {
            out[i] += row[0] * v[i];
            for (d, x) in row.iter().enumerate().skip(1) {
                out[i] += x * v[i - d];
                out[i - d] += x.conj() * v[i];
            }
        }
        out
    }

    /// No pivoting; the count of negative pivots is the number of eigenvalues below `sigma` (Sylvester).
    fn factor(&self, sigma: f64) -> Ldl {
        let n = self.rows.len();
        let w = self.width;
        let tiny = f64::EPSILON * f64::EPSILON;
        let mut l: Vec<Vec<C64>> = self.rows.clone();
        let mut piv = vec![0.0f64; n];
        let mut negatives = 0;
        for j in 0..n {
            let mut dj = l[j][0].re - sigma;
            for kk in j.saturating_sub(w)..j {
                dj -= l[j][j - kk].norm_sqr() * piv[kk];
            }
            if dj.abs() < tiny {
                dj = -tiny;
            }
            piv[j] = dj;
            if dj < 0.0 {
                negatives += 1;
            }
            for i in (j + 1)..n.min(j + w + 1) {
                let mut v = l[i][i - j];
                for kk in i.saturating_sub(w)..j {
                    v -= l[i][i - kk] * l[j][j - kk].conj() * piv[kk];
                }
                l[i][i - j] = v / dj;
            }
        }
        Ldl { l, piv, negatives }
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, index: usize, tol: f64) -> f64 {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.factor(mid).negatives > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Rayleigh quotient iteration for the single eigenvalue in `(lo, hi]`.
    /// Accepted only once the residual certifies an eigenvalue inside the bracket.
    fn rayleigh(&self, lo: f64, hi: f64, tol: f64) -> Option<f64> {
        let n = self.rows.len();
        let mut v: Vec<C64> = (0..n).map(|j| C64::new(1.0 + 0.5 * (j as f64).sin(), 0.25 * (0.7 * j as f64).cos())).collect();
        let mut sigma = 0.5 * (lo + hi);
        for _ in 0..12 {
            let x = self.factor(sigma).solve(&v);
            let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return None;
            }
            v = x.into_iter().map(|z| z / norm).collect();
            let kv = self.apply(&v);
            let rho: f64 = v.iter().zip(&kv).map(|(a, b)| (a.conj() * b).re).sum();
            let residual = kv.iter().zip(&v).map(|(a, b)| (a - b * rho).norm_sqr()).sum::<f64>().sqrt();
            if !(rho > lo && rho <= hi) {
                return None;
            }
            if residual <= 64.0 * tol && rho - residual > lo && rho + residual <= hi {
                return Some(rho);
            }
            sigma = rho;
        }
        None
    }
}

impl Ldl {
    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = b.len();
        let w = self.l.iter().map(|r| r.len() - 1).max().unwrap_or(0);
        let mut y = b.to_vec();
        for i in 0..n {
            for d in 1..self.l[i].len() {
                let v = self.l[i][d] * y[i - d];
                y[i] -= v;
            }
        }
        for i in 0..n {
            y[i] /= self.piv[i];
        }
        for i in (0..n).rev() {
            for m in (i + 1)..n.min(i + w + 1) {
                if m - i < self.l[m].len() {
                    let v = self.l[m][m - i].conj() * y[m];
                    y[i] -= v;
                }
            }
        }
        y
    }
}

/// Dense fallback for coefficients that do not decouple.
fn dense_trace(problem: &FdProblem, phi: &CutoffFunction, t: f64, x_max: f64, cells: usize) -> Result<f64> {
    let n = problem.dim();
    let h = x_max / cells as f64;
    let (k, z) = dense_operator(problem, x_max, cells)?;
    let r = z.ncols();
    let (mus, vecs) = linalg::eigh(&k)?;
    let weight = problem.weight.clone().unwrap_or_else(|| linalg::identity(n));
    let zwz = z.adjoint() * &weight * &z;
    let mut total = 0.0;
    for (q, &mu) in mus.iter().enumerate() {
        if t * mu > 41.0 {
            break;
        }
        let y = vecs.column(q);
        // Node 0: values Z c with mass h/2; y = M^{1/2} u so u*Mu terms reduce to y*.
        let c = y.rows(0, r).into_owned();
        let mut local = phi.eval(0.0) * (c.adjoint() * &zwz * &c)[(0, 0)].re;
        for j in 1..cells {
            let f = y.rows(r + (j - 1) * n, n).into_owned();
            local += phi.eval(j as f64 * h) * (f.adjoint() * &weight * &f)[(0, 0)].re;
        }
        total += (-t * mu).exp() * local;
    }
    Ok(total)
}
