//! End-to-end acceptance run: one line per criterion, tolerances fixed here.

use std::f64::consts::PI;
use std::time::Instant;

use dirac_bvp::glueing::{double, DeformationFamily};
use dirac_bvp::harness::{generate_path, generate_structure, random_projection, random_unitary, run_suite, RunReport, ScenarioConfig, Suite, ThetaGrid, Value, XGrid};
use dirac_bvp::heat::{
    circle_supertrace, expansion_fit_s8, kernel_numeric, sommerfeld_kernel, verify_s5, BoundaryKind, CutoffFunction, FdGrid, FdProblem, S8Input, TGrid,
};
use dirac_bvp::interval::verify_s7;
use dirac_bvp::invariants::MatrixPath;
use dirac_bvp::linalg::{self, ComplexMatrix, C64};
use dirac_bvp::{aps_projection, fredholm_pair_index, DiracStructure, Error, HermitianOperator, OrthoProjection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const STRUCTURE_TOL: f64 = 1e-10;
const APS_TOL: f64 = 1e-10;
const INTEGRAL_TOL: f64 = 1e-8;
const S5_TOL: f64 = 1e-3;
const KERNEL_TOL: f64 = 1e-10;
const HEAT_RESIDUAL_TOL: f64 = 1e-6;
const KERNEL_ORACLE_TOL: f64 = 1e-5;
const MCKEAN_SINGER_TOL: f64 = 1e-10;
const LEADING_REL_TOL: f64 = 1e-2;
const CONSTANT_REL_TOL: f64 = 2e-2;
const LOG_TOL: f64 = 1e-6;
const C1_SECONDS: f64 = 5.0;
const C5_SECONDS: f64 = 60.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn suite(s: Suite, seed: u64) -> RunReport {
    run_suite(&ScenarioConfig::new(s, seed)).unwrap()
}

// ---------------------------------------------------------------------------
// Oracles written against the raw matrices, independent of the library's
// structure and projection code.

fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

/// Hermitian eigendecomposition with eigenvalues ascending.
fn eig(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let e = nalgebra::SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = ComplexMatrix::from_columns(&idx.iter().map(|&i| e.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (vals, vecs)
}

/// Projection onto eigenvectors whose eigenvalue passes `keep`.
fn window(m: &ComplexMatrix, keep: impl Fn(f64) -> bool) -> ComplexMatrix {
    let (vals, vecs) = eig(m);
    let n = m.nrows();
    let mut p = ComplexMatrix::zeros(n, n);
    for (k, v) in vals.iter().enumerate() {
        if keep(*v) {
            let c = vecs.column(k);
            p += &c * c.adjoint();
        }
    }
    p
}

/// `dim(im P1 ∩ ker P2) - dim(ker P1 ∩ im P2)` from singular values of stacked conditions.
fn pair_index_oracle(p1: &ComplexMatrix, p2: &ComplexMatrix) -> i64 {
    let n = p1.nrows();
    let null = |top: &ComplexMatrix, bottom: &ComplexMatrix| {
        let mut m = ComplexMatrix::zeros(2 * n, n);
        m.view_mut((0, 0), (n, n)).copy_from(top);
        m.view_mut((n, 0), (n, n)).copy_from(bottom);
        m.singular_values().iter().filter(|s| **s < 1e-8).count()
    };
    let id = identity(n);
    null(p2, &(&id - p1)) as i64 - null(p1, &(&id - p2)) as i64
}

/// Orthonormal basis of the span of the columns, by SVD.
fn orth(m: &ComplexMatrix) -> ComplexMatrix {
    if m.ncols() == 0 {
        return ComplexMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let scale = svd.singular_values.max().max(1e-300);
    let keep: Vec<_> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > 1e-10 * scale).map(|k| u.column(k).into_owned()).collect();
    if keep.is_empty() {
        ComplexMatrix::zeros(m.nrows(), 0)
    } else {
        ComplexMatrix::from_columns(&keep)
    }
}

/// Eigenvectors of a projection on one side of 1/2.
fn eigenspace(p: &ComplexMatrix, upper: bool) -> ComplexMatrix {
    let (vals, vecs) = eig(p);
    let cols: Vec<_> = (0..vals.len()).filter(|&k| (vals[k] > 0.5) == upper).map(|k| vecs.column(k).into_owned()).collect();
    if cols.is_empty() {
        ComplexMatrix::zeros(p.nrows(), 0)
    } else {
        ComplexMatrix::from_columns(&cols)
    }
}

fn range_of(p: &ComplexMatrix) -> ComplexMatrix {
    eigenspace(p, true)
}

fn kernel_of(p: &ComplexMatrix) -> ComplexMatrix {
    eigenspace(p, false)
}

/// `dim(U ∩ V)` from principal angles between orthonormal bases.
fn intersection(u: &ComplexMatrix, v: &ComplexMatrix) -> usize {
    if u.ncols() == 0 || v.ncols() == 0 {
        return 0;
    }
    (u.adjoint() * v).singular_values().iter().filter(|s| **s > 1.0 - 1e-7).count()
}

/// Fundamental matrix of `f' = sign * A(x) f` on the path interval by classical RK4.
fn rk4_fundamental(path: &MatrixPath, sign: f64, steps: usize) -> ComplexMatrix {
    let (a, b) = path.interval();
    let h = (b - a) / steps as f64;
    let n = path.dim();
    let f = |x: f64, y: &ComplexMatrix| path.eval(x) * y * C64::new(sign, 0.0);
    let mut y = identity(n);
    for i in 0..steps {
        let x = a + i as f64 * h;
        let hc = C64::new(h, 0.0);
        let k1 = f(x, &y);
        let k2 = f(x + 0.5 * h, &(&y + &k1 * (hc * 0.5)));
        let k3 = f(x + 0.5 * h, &(&y + &k2 * (hc * 0.5)));
        let k4 = f(x + h, &(&y + &k3 * hc));
        y += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (hc / 6.0);
    }
    y
}

/// Kernel and cokernel dimensions of `d/dx + A` with `P f(a) = 0`, `(I - Q) f(b) = 0`.
fn interval_oracle(path: &MatrixPath, p: &ComplexMatrix, q: &ComplexMatrix) -> (usize, usize) {
    let t = rk4_fundamental(path, -1.0, 4000);
    let s = rk4_fundamental(path, 1.0, 4000);
    let kernel = intersection(&orth(&(t * kernel_of(p))), &range_of(q));
    let cokernel = intersection(&orth(&(s * range_of(p))), &kernel_of(q));
    (kernel, cokernel)
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let report = suite(Suite::Structure, 101);
    let elapsed = start.elapsed().as_secs_f64();
    let mut g = rng(1);
    let mut worst = 0.0f64;
    let mut bad = 0;
    for i in 0..200u64 {
        let d = g.random_range(2..=16usize);
        let dp = g.random_range(0..=d);
        let dm = d - dp;
        let k = g.random_range(0..=dp.min(dm).min(2));
        let s = generate_structure(1000 + i, dp, dm, k, dp == dm).unwrap();
        let gm = s.gamma();
        let a = s.a_matrix();
        let id = identity(d);
        let mut r = [max_abs(&(gm.adjoint() + gm)), max_abs(&(gm * gm + &id)), max_abs(&(gm * a + a * gm)), max_abs(&(a - a.adjoint()))].to_vec();
        if let Some(w) = s.omega() {
            r.extend([max_abs(&(w * w - &id)), max_abs(&(w * gm + gm * w)), max_abs(&(w * a - a * w))]);
        }
        let m = r.iter().copied().fold(0.0, f64::max);
        worst = worst.max(m / d as f64);
        if m > STRUCTURE_TOL * d as f64 {
            bad += 1;
        }
    }
    let pass = report.passed && report.instances.len() == 200 && bad == 0 && elapsed < C1_SECONDS;
    verdict(pass, format!("suite {} instances in {elapsed:.2}s (< {C1_SECONDS}s), recheck worst residual/dim {worst:.1e}, {bad} over tol", report.instances.len()))
}

fn criterion_2() -> Verdict {
    let mut g = rng(2);
    let (mut worst_sym, mut worst_order) = (0.0f64, f64::INFINITY);
    let mut sym_fail = 0;
    for i in 0..100u64 {
        let m = g.random_range(1..=8usize);
        let k = g.random_range(0..=m.min(3));
        let s = generate_structure(2000 + i, m, m, k, g.random::<bool>()).unwrap();
        let p = aps_projection(&s).unwrap();
        let (gm, pm) = (s.gamma(), p.matrix());
        let sym = max_abs(&(gm.adjoint() * pm * gm - (identity(2 * m) - pm)));
        let a = s.a_matrix();
        let thr = 1e-9 * linalg::max_norm(a).max(1.0);
        let pos = window(a, |v| v > thr);
        let nonneg = window(a, |v| v >= -thr);
        let lower = eig(&(pm - &pos)).0[0];
        let upper = eig(&(&nonneg - pm)).0[0];
        worst_sym = worst_sym.max(sym);
        worst_order = worst_order.min(lower.min(upper));
        if sym > APS_TOL || lower < -APS_TOL || upper < -APS_TOL {
            sym_fail += 1;
        }
    }
    let mut obstructed = 0;
    for i in 0..20u64 {
        let (dp, dm) = if i == 0 {
            (1, 0)
        } else {
            let dp = g.random_range(0..=6usize);
            let mut dm = g.random_range(0..=6usize);
            if dm == dp {
                dm += 1;
            }
            (dp, dm)
        };
        let s = generate_structure(2200 + i, dp, dm, 0, false).unwrap();
        if i == 0 {
            // The scalar model i d/dx.
            assert!(max_abs(&(s.gamma() - identity(1) * C64::new(0.0, 1.0))) == 0.0 && max_abs(s.a_matrix()) == 0.0);
        }
        if let Err(Error::NoGammaSymmetricProjection { signature }) = aps_projection(&s) {
            if signature.unsigned_abs() as usize == dp.abs_diff(dm) {
                obstructed += 1;
            }
        }
    }
    verdict(
        sym_fail == 0 && obstructed == 20,
        format!("100 balanced: max gamma residual {worst_sym:.1e}, min ordering eigenvalue {worst_order:.1e}; {obstructed}/20 unbalanced raise the obstruction"),
    )
}

fn criterion_3() -> Verdict {
    let mut g = rng(3);
    let mut bad = 0;
    let total = 300;
    for i in 0..total {
        let dp = g.random_range(0..=8usize);
        let dm = g.random_range(0..=8usize);
        if dp + dm == 0 {
            continue;
        }
        let k = g.random_range(0..=dp.min(dm).min(3));
        let s = generate_structure(3000 + i, dp, dm, k, false).unwrap();
        let sig = s.kernel_signature().unwrap();
        let ind = s.ind_a_plus();
        // Signature of i gamma on ker A, from an SVD null space of A.
        let a = s.a_matrix();
        let svd = a.clone().svd(false, true);
        let vt = svd.v_t.unwrap();
        let null: Vec<_> = (0..a.ncols()).filter(|&r| svd.singular_values[r] < 1e-9).map(|r| vt.row(r).adjoint()).collect();
        let raw = if null.is_empty() {
            0
        } else {
            let kb = ComplexMatrix::from_columns(&null);
            let form = kb.adjoint() * (s.gamma() * C64::new(0.0, 1.0)) * &kb;
            let vals = eig(&linalg::hermitian_part(&form)).0;
            vals.iter().filter(|v| **v > 0.5).count() as i64 - vals.iter().filter(|v| **v < -0.5).count() as i64
        };
        if !(sig == raw && sig == -ind && sig == dm as i64 - dp as i64 && (sig == 0) == (ind == 0)) {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("{total} instances: kernel signature = -ind A+ = dim H- - dim H+, {bad} mismatches"))
}

fn criterion_4() -> Verdict {
    let mut g = rng(4);
    let mut anti_fail = 0;
    let mut oracle_fail = 0;
    for _ in 0..500 {
        let n = g.random_range(1..=8usize);
        let r1 = g.random_range(0..=n);
        let p1 = random_projection(&mut g, n, r1);
        // Half of the pairs share part of their ranges, so that intersections are nontrivial.
        let p2 = if g.random::<bool>() {
            let re = g.random_range(0..=n);
            let extra = random_projection(&mut g, n, re);
            let keep = g.random_range(0..=p1.rank());
            let basis = p1.range_basis().columns(0, keep).into_owned();
            let mut cols: Vec<_> = basis.column_iter().map(|c| c.into_owned()).collect();
            cols.extend(extra.range_basis().column_iter().map(|c| c.into_owned()));
            if cols.is_empty() {
                OrthoProjection::zero(n)
            } else {
                OrthoProjection::from_span(&ComplexMatrix::from_columns(&cols))
            }
        } else {
            let r2 = g.random_range(0..=n);
            random_projection(&mut g, n, r2)
        };
        let f = fredholm_pair_index(&p1, &p2).unwrap();
        if f != -fredholm_pair_index(&p2, &p1).unwrap() {
            anti_fail += 1;
        }
        if f != pair_index_oracle(p1.matrix(), p2.matrix()) {
            oracle_fail += 1;
        }
    }
    // Every pair of coordinate subspaces, counted direction by direction.
    let mut exhaustive = 0;
    let mut exhaustive_fail = 0;
    for n in 1..=4usize {
        let u = random_unitary(&mut g, n);
        for m1 in 0..1u32 << n {
            for m2 in 0..1u32 << n {
                let f1: Vec<bool> = (0..n).map(|i| m1 >> i & 1 == 1).collect();
                let f2: Vec<bool> = (0..n).map(|i| m2 >> i & 1 == 1).collect();
                let count = (0..n).filter(|&i| f1[i] && !f2[i]).count() as i64 - (0..n).filter(|&i| !f1[i] && f2[i]).count() as i64;
                let p1 = OrthoProjection::diagonal(&f1).conjugate(&u);
                let p2 = OrthoProjection::diagonal(&f2).conjugate(&u);
                exhaustive += 1;
                if fredholm_pair_index(&p1, &p2).unwrap() != count {
                    exhaustive_fail += 1;
                }
            }
        }
    }
    verdict(
        anti_fail == 0 && oracle_fail == 0 && exhaustive_fail == 0,
        format!("500 pairs: {anti_fail} antisymmetry and {oracle_fail} oracle failures; {exhaustive} commuting pairs up to dim 4, {exhaustive_fail} mismatches"),
    )
}

fn criterion_5() -> Verdict {
    let mut g = rng(5);
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut instances = Vec::new();
    for i in 0..50u64 {
        let n = g.random_range(1..=8usize);
        let path = generate_path(5000 + i, n, 3, None).unwrap();
        let (rp, rq) = (g.random_range(0..=n), g.random_range(0..=n));
        let p = random_projection(&mut g, n, rp);
        let q = random_projection(&mut g, n, rq);
        reports.push(verify_s7(&path, &p, &q, 1e-10, None).unwrap());
        instances.push((path, p, q));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let line2_fail = reports.iter().filter(|r| r.line2_residual != 0.0).count();
    let worst_integral = reports.iter().fold(0.0f64, |m, r| m.max(r.integral_term.abs()));
    let worst_bar = reports.iter().fold(0.0f64, |m, r| m.max(r.integral_error));
    let mut oracle_fail = 0;
    for ((path, p, q), r) in instances.iter().zip(&reports) {
        if interval_oracle(path, p.matrix(), q.matrix()) != (r.kernel_dim, r.cokernel_dim) {
            oracle_fail += 1;
        }
    }
    let pass = line2_fail == 0 && worst_integral <= INTEGRAL_TOL && worst_bar <= INTEGRAL_TOL && oracle_fail == 0 && elapsed < C5_SECONDS;
    verdict(
        pass,
        format!("50 paths in {elapsed:.2}s (< {C5_SECONDS}s): {line2_fail} nonzero integer residuals, |integral| <= {worst_integral:.1e} (bar {worst_bar:.1e}), {oracle_fail} RK4 kernel/cokernel mismatches"),
    )
}

/// `-(eta(A+) + dim ker A+)/2 + ind(P>=0(A+), P+)`, computed on the `+1` eigenspace of omega.
fn s5_prediction(s: &DiracStructure, p: &OrthoProjection) -> f64 {
    let (vals, vecs) = eig(s.omega().unwrap());
    let cols: Vec<_> = (0..vals.len()).filter(|&k| vals[k] > 0.0).map(|k| vecs.column(k).into_owned()).collect();
    let v = ComplexMatrix::from_columns(&cols);
    let a_plus = linalg::hermitian_part(&(v.adjoint() * s.a_matrix() * &v));
    let p_plus = linalg::hermitian_part(&(v.adjoint() * p.matrix() * &v));
    let thr = 1e-9 * linalg::max_norm(&a_plus).max(1.0);
    let ev = eig(&a_plus).0;
    let eta = ev.iter().filter(|l| **l > thr).count() as f64 - ev.iter().filter(|l| **l < -thr).count() as f64;
    let kernel = ev.iter().filter(|l| l.abs() <= thr).count() as f64;
    let nonneg = window(&a_plus, |l| l >= -thr);
    -0.5 * (eta + kernel) + pair_index_oracle(&nonneg, &p_plus) as f64
}

fn criterion_6() -> Verdict {
    let report = suite(Suite::S5, 106);
    let reading = report.summary.iter().find(|c| c.name == "common_reading").map(|c| match &c.value {
            Value::Text(t) => t.clone(),
            other => format!("{other:?}"),
        })
        .unwrap_or_default();
    let oracle_ok = report.instances.iter().all(|i| i.checks.iter().any(|c| c.name == "oracle_difference" && c.pass));
    let mut g = rng(6);
    let phi = CutoffFunction::smooth_bump(4.0, 6.0).unwrap();
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let m = g.random_range(1..=3usize);
        let k = g.random_range(0..=m);
        let s = generate_structure(6000 + i, m, m, k, true).unwrap();
        let p = aps_projection(&s).unwrap();
        let r = verify_s5(&s, &p, &phi, None).unwrap();
        worst = worst.max((r.lim - s5_prediction(&s, &p)).abs());
    }
    verdict(
        report.passed && report.instances.len() >= 10 && oracle_ok && worst <= S5_TOL,
        format!("suite {} instances, common reading {reading}, discretization oracle agrees {oracle_ok}; 10 rechecked, max |LIM - prediction| {worst:.1e}", report.instances.len()),
    )
}

fn criterion_7() -> Verdict {
    let mut g = rng(7);
    let (mut bc, mut herm, mut heat, mut oracle) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..6u64 {
        let m = g.random_range(1..=2usize);
        let s = generate_structure(7000 + i, m, m, 0, false).unwrap();
        let p = aps_projection(&s).unwrap();
        let k = |x: f64, y: f64, t: f64| sommerfeld_kernel(&s, &p, x, y, t).unwrap();
        let a2 = s.a_matrix() * s.a_matrix();
        let problem = FdProblem::from_structure(&s, &p, false).unwrap();
        let grid = FdGrid { x_max: 8.0, n_points: 800 };
        for _ in 0..4 {
            let x = 0.1 * g.random_range(2..=20) as f64;
            let y = 0.1 * g.random_range(0..=20) as f64;
            let t = [0.2, 0.5, 1.0][g.random_range(0..3)];
            let scale = max_abs(&k(x, y, t)).max(1.0);
            bc = bc.max(max_abs(&(p.matrix() * k(0.0, y, t))) / scale);
            herm = herm.max(max_abs(&(k(x, y, t) - k(y, x, t).adjoint())) / scale);
            let (hx, ht) = (2e-3, 1e-3);
            let kxx = (-k(x - 2.0 * hx, y, t) + k(x - hx, y, t) * C64::new(16.0, 0.0) - k(x, y, t) * C64::new(30.0, 0.0) + k(x + hx, y, t) * C64::new(16.0, 0.0)
                - k(x + 2.0 * hx, y, t))
                / C64::new(12.0 * hx * hx, 0.0);
            let kt = (k(x, y, t - 2.0 * ht) - k(x, y, t - ht) * C64::new(8.0, 0.0) + k(x, y, t + ht) * C64::new(8.0, 0.0) - k(x, y, t + 2.0 * ht))
                / C64::new(12.0 * ht, 0.0);
            heat = heat.max(max_abs(&(kt - kxx + &a2 * k(x, y, t))));
            let (num, _) = kernel_numeric(&problem, x, y, t, &grid).unwrap();
            oracle = oracle.max(max_abs(&(num - k(x, y, t))));
        }
    }
    verdict(
        bc <= KERNEL_TOL && herm <= KERNEL_TOL && heat <= HEAT_RESIDUAL_TOL && oracle <= KERNEL_ORACLE_TOL,
        format!("24 samples: |P k(0,y,t)| {bc:.1e}, Hermitian defect {herm:.1e}, heat residual {heat:.1e}, discretization difference {oracle:.1e}"),
    )
}

fn criterion_8() -> Verdict {
    let report = suite(Suite::Ms, 108);
    let mut g = rng(8);
    let ts: Vec<f64> = (0..8).map(|i| 0.1 + 1.9 * i as f64 / 7.0).collect();
    let (mut spread, mut index_gap) = (0.0f64, 0.0f64);
    for i in 0..20u64 {
        let m = g.random_range(1..=4usize);
        let k = g.random_range(0..=m);
        let s = generate_structure(8000 + i, m, m, k, true).unwrap();
        let values: Vec<f64> = ts.iter().map(|&t| circle_supertrace(&s, 2.0 * PI, t, 200, 1e-12).unwrap()).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
        // Only the constant sections in ker A survive: tr(omega) on ker A.
        let kernel = window(s.a_matrix(), |l| l.abs() < 1e-9);
        let str_ker = (s.omega().unwrap() * kernel).trace().re;
        index_gap = index_gap.max((values[0] - str_ker).abs());
    }
    verdict(
        report.passed && report.instances.len() == 20 && spread <= MCKEAN_SINGER_TOL && index_gap <= MCKEAN_SINGER_TOL,
        format!("suite {} instances; 20 rechecked on t in [0.1, 2]: spread {spread:.1e}, |supertrace - tr(omega on ker A)| {index_gap:.1e}", report.instances.len()),
    )
}

fn criterion_9() -> Verdict {
    let report = suite(Suite::S6, 109);
    // The family against its closed form cos^2 P + sin^2 (I - P) + sin cos tau.
    let s = generate_structure(9, 2, 2, 1, true).unwrap();
    let d = double(&s).unwrap();
    let p = d.lift(&aps_projection(&s).unwrap()).unwrap();
    let family = DeformationFamily::new(&p, &d.tau, 1e-10).unwrap();
    let n = d.dim();
    let mut formula_gap = 0.0f64;
    for theta in ThetaGrid::default().values() {
        let (sn, cs) = theta.sin_cos();
        let expected = p.matrix() * C64::new(cs * cs, 0.0) + (identity(n) - p.matrix()) * C64::new(sn * sn, 0.0) + &d.tau * C64::new(sn * cs, 0.0);
        formula_gap = formula_gap.max(max_abs(&(family.p_theta(theta).unwrap().matrix() - expected)));
    }
    let per_check = |name: &str| report.instances.iter().all(|i| i.checks.iter().any(|c| c.name == name && c.pass));
    let pass = report.passed
        && report.instances.len() == 10
        && ["all_wellposed", "max_norm_ratio", "pair_index_constant", "max_jump"].iter().all(|c| per_check(c))
        && formula_gap <= 1e-12;
    verdict(
        pass,
        format!(
            "{} doubled instances on 33 angles: well-posed {}, norm bound {}, index constant {}, jumps within C dtheta {}; closed-form gap {formula_gap:.1e}",
            report.instances.len(),
            per_check("all_wellposed"),
            per_check("max_norm_ratio"),
            per_check("pair_index_constant"),
            per_check("max_jump")
        ),
    )
}

fn criterion_10() -> Verdict {
    let report = suite(Suite::S9, 110);
    let circles = report.instances.iter().filter(|i| i.label.starts_with("circle")).count();
    let intervals = report.instances.iter().filter(|i| i.label.starts_with("interval")).count();
    // Exhaustive diagonal sweep, every index counted coordinate by coordinate.
    let count = |f1: &[bool], f2: &[bool]| -> i64 {
        f1.iter().zip(f2).filter(|(a, b)| **a && !**b).count() as i64 - f1.iter().zip(f2).filter(|(a, b)| !**a && **b).count() as i64
    };
    let (mut total, mut bad) = (0, 0);
    for n in 1..=4usize {
        for code in 0..3usize.pow(n as u32) {
            let vals: Vec<f64> = (0..n).map(|j| ((code / 3usize.pow(j as u32)) % 3) as f64 - 1.0).collect();
            for mask in 0..1u32 << n {
                let pf: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let qf: Vec<bool> = pf.iter().map(|b| !b).collect();
                let pos: Vec<bool> = vals.iter().map(|v| *v > 0.0).collect();
                let nonneg: Vec<bool> = vals.iter().map(|v| *v >= 0.0).collect();
                let neg_nonneg: Vec<bool> = vals.iter().map(|v| *v <= 0.0).collect();
                let not_pos: Vec<bool> = pos.iter().map(|b| !b).collect();
                let kernel = vals.iter().filter(|v| **v == 0.0).count() as i64;
                let expected = (count(&neg_nonneg, &qf), count(&not_pos, &qf), count(&pos, &pf), count(&nonneg, &pf), count(&nonneg, &pos));
                let r = dirac_bvp::glueing::post_s9_identities(&HermitianOperator::from_real_diagonal(&vals), &OrthoProjection::diagonal(&pf)).unwrap();
                let got = (r.nonneg_of_negated, r.complement_of_positive, r.positive, r.nonneg, r.nonneg_vs_positive);
                let chains = expected.0 == expected.1 && expected.1 == -expected.2 && expected.3 == expected.4 + expected.2 && expected.4 == kernel;
                total += 1;
                if got != expected || !chains || !r.holds() {
                    bad += 1;
                }
            }
        }
    }
    verdict(
        report.passed && circles >= 20 && intervals >= 20 && bad == 0,
        format!("{circles} circle and {intervals} interval glueings with zero residual: {}; {total} diagonal configurations, {bad} failures", report.passed),
    )
}

fn criterion_11() -> Verdict {
    let phi = CutoffFunction::smooth_bump(4.0, 6.0).unwrap();
    let grid = TGrid::for_log_fit(0.0, phi.flat);
    let r = expansion_fit_s8(S8Input::Block { lambda: 0.0, kind: BoundaryKind::Dirichlet }, None, &phi, &grid, 6, true).unwrap();
    // Integral of phi by composite Simpson, independent of the cutoff's own quadrature.
    let m = 20000;
    let h = phi.support / m as f64;
    let integral = (0..=m).map(|i| phi.eval(i as f64 * h) * if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 }).sum::<f64>() * h / 3.0;
    let lead = integral / (4.0 * PI).sqrt();
    let constant = -phi.eval(0.0) / 4.0;
    let lead_rel = ((r.fit.coeff(0, 0) - lead) / lead).abs();
    let const_rel = ((r.fit.lim - constant) / constant).abs();
    let mut worst_log = r.low_order_log;
    let mut g = rng(11);
    for i in 0..4u64 {
        let mm = g.random_range(1..=3usize);
        let s = generate_structure(11000 + i, mm, mm, g.random_range(0..=mm), false).unwrap();
        let p = aps_projection(&s).unwrap();
        let grid = TGrid::for_log_fit(linalg::hermitian_norm(s.a_matrix()).unwrap(), phi.flat);
        let f = expansion_fit_s8(S8Input::Structure(&s), Some(&p), &phi, &grid, 6, true).unwrap();
        worst_log = worst_log.max(f.low_order_log);
    }
    verdict(
        lead_rel <= LEADING_REL_TOL && const_rel <= CONSTANT_REL_TOL && worst_log <= LOG_TOL,
        format!("Dirichlet block: leading rel error {lead_rel:.1e}, constant rel error {const_rel:.1e}; largest low-order log coefficient {worst_log:.1e}"),
    )
}

fn criterion_12() -> Verdict {
    let mut mismatched = Vec::new();
    for s in Suite::ALL {
        let mut c = ScenarioConfig::new(s, 1200);
        c.instances = Some(match s {
            Suite::S5 | Suite::S6 | Suite::S8 => 2,
            _ => 6,
        });
        if s == Suite::S6 {
            c.theta_grid = Some(ThetaGrid { lo: -1.0, hi: 1.0, count: 5 });
            c.x_grid = Some(XGrid { x_max: 3.0, cells: 20 });
        }
        let first = run_suite(&c).unwrap();
        c.workers = Some(2);
        let second = run_suite(&c).unwrap();
        if first.hash != second.hash || first.instances != second.instances {
            mismatched.push(s.name());
        }
    }
    verdict(mismatched.is_empty(), format!("{} suites run twice, once on 2 workers, hash or result mismatches: {mismatched:?}", Suite::ALL.len()))
}

#[test]
fn acceptance() {
    let criteria: [(usize, fn() -> Verdict); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut failed = Vec::new();
    println!();
    for (n, f) in criteria {
        let start = Instant::now();
        let v = f();
        println!("criterion {n}: {} ({:.1}s) {}", if v.pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
