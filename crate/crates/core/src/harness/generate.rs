use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::invariants::{MatrixPath, PathTerm, TermKind};
use crate::linalg::{self, ComplexMatrix, C64, I};
use crate::structure::{default_tol, validate_structure, DiracStructure, HermitianOperator, OrthoProjection};

pub(crate) fn rng_for(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Complex Ginibre matrix with entries of unit variance.
pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

/// Haar-distributed unitary from the QR factor of a Ginibre matrix, with the phases of `R` divided out.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    let qr = ginibre(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Hermitian matrix `(G + G*) / (2 sqrt(n))`, spectrum of order one.
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, n);
    (&g + g.adjoint()) * C64::new(0.5 / (n.max(1) as f64).sqrt(), 0.0)
}

/// Hermitian matrix with exactly `kernel_dim` zero eigenvalues and the rest bounded away from zero.
pub fn random_hermitian_with_kernel(rng: &mut impl Rng, n: usize, kernel_dim: usize) -> Result<HermitianOperator> {
    if kernel_dim > n {
        return Err(Error::InfeasibleRequest(format!("kernel of dimension {kernel_dim} in dimension {n}")));
    }
    let u = random_unitary(rng, n);
    let vals: Vec<f64> = (0..n)
        .map(|k| {
            if k < kernel_dim {
                0.0
            } else {
                let mag = 0.25 + rng.random::<f64>() * 1.75;
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
        })
        .collect();
    let m = &u * linalg::diag_real(&vals) * u.adjoint();
    Ok(HermitianOperator::from_hermitian_part(&m))
}

/// Projection onto the span of `rank` Ginibre vectors.
pub fn random_projection(rng: &mut impl Rng, n: usize, rank: usize) -> OrthoProjection {
    if rank == 0 {
        return OrthoProjection::zero(n);
    }
    let basis = linalg::orthonormalize(&ginibre(rng, n, rank));
    OrthoProjection::from_orthonormal_basis(&basis, n)
}

/// `gamma = i diag(I_{dim_plus}, -I_{dim_minus})`, `A = [[0, B], [B*, 0]]` with a Ginibre
/// block `B` whose `kernel_dim` smallest singular values are set to zero.
///
/// The grading, when requested, is `[[0, W], [W*, 0]]` with `W = U D V*` built on the
/// singular vectors of `B`: random signs on the nonzero singular values and a random
/// unitary on the zeroed ones. It needs `dim_plus = dim_minus`.
pub fn generate_structure(seed: u64, dim_plus: usize, dim_minus: usize, kernel_dim: usize, with_omega: bool) -> Result<DiracStructure> {
    let n = dim_plus + dim_minus;
    if n == 0 {
        return Err(Error::InfeasibleRequest("structure of dimension 0".into()));
    }
    let m = dim_plus.min(dim_minus);
    if kernel_dim > m {
        return Err(Error::InfeasibleRequest(format!(
            "cannot zero {kernel_dim} singular values of a {dim_plus}x{dim_minus} block"
        )));
    }
    if with_omega && dim_plus != dim_minus {
        return Err(Error::InfeasibleRequest(format!(
            "a grading needs equal gamma eigenspaces, got {dim_plus} and {dim_minus}"
        )));
    }
    let mut rng = rng_for(seed);
    let scale = 1.0 / (dim_plus.max(dim_minus).max(1) as f64).sqrt();
    let g = ginibre(&mut rng, dim_plus, dim_minus) * C64::new(scale, 0.0);
    let mut b = ComplexMatrix::zeros(dim_plus, dim_minus);
    let mut u_full = linalg::identity(dim_plus);
    let mut v_full = linalg::identity(dim_minus);
    let mut sigma = vec![0.0; m];
    if m > 0 {
        let svd = g.svd(true, true);
        let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let u = linalg::select_columns(&u, &order);
        let v = linalg::select_columns(&v_t.adjoint(), &order);
        for (k, &i) in order.iter().enumerate() {
            sigma[k] = if k < m - kernel_dim { svd.singular_values[i] } else { 0.0 };
        }
        b = &u * linalg::diag_real(&sigma) * v.adjoint();
        u_full = u;
        v_full = v;
    }
    let mut gamma = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        gamma[(k, k)] = if k < dim_plus { I } else { -I };
    }
    let mut a = ComplexMatrix::zeros(n, n);
    a.view_mut((0, dim_plus), (dim_plus, dim_minus)).copy_from(&b);
    a.view_mut((dim_plus, 0), (dim_minus, dim_plus)).copy_from(&b.adjoint());

    let omega = if with_omega {
        let live = m - kernel_dim;
        let mut d = ComplexMatrix::zeros(m, m);
        for k in 0..live {
            d[(k, k)] = C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0);
        }
        let q = random_unitary(&mut rng, kernel_dim);
        d.view_mut((live, live), (kernel_dim, kernel_dim)).copy_from(&q);
        let w = &u_full * d * v_full.adjoint();
        let mut omega = ComplexMatrix::zeros(n, n);
        omega.view_mut((0, m), (m, m)).copy_from(&w);
        omega.view_mut((m, 0), (m, m)).copy_from(&w.adjoint());
        Some(omega)
    } else {
        None
    };
    validate_structure(gamma, a, omega, default_tol(n))
}

/// Random Hermitian path on `[0, 1]` with `n_terms` coefficients.
///
/// Without a plateau the terms are a constant followed by alternating
/// `cos(k pi x)` and `sin(k pi x)`. With a plateau `x0` every term is a
/// polynomial in `u = x / x0` whose derivative vanishes at `u = 1`: the blend
/// `3u^2 - 2u^3` and then `u^k (1 - u)^2`, so clamping at `x0` stays `C^1`.
pub fn generate_path(seed: u64, dim: usize, n_terms: usize, plateau: Option<f64>) -> Result<MatrixPath> {
    if n_terms == 0 || dim == 0 {
        return Err(Error::InfeasibleRequest("a path needs at least one term and positive dimension".into()));
    }
    let mut rng = rng_for(seed);
    let mut coeffs: Vec<ComplexMatrix> = (0..n_terms).map(|_| random_hermitian(&mut rng, dim)).collect();
    let terms = match plateau {
        None => coeffs
            .drain(..)
            .enumerate()
            .map(|(k, c)| match k {
                0 => PathTerm::new(TermKind::Poly, 0.0, c),
                _ => {
                    let freq = ((k + 1) / 2) as f64 * std::f64::consts::PI;
                    let kind = if k % 2 == 1 { TermKind::Cos } else { TermKind::Sin };
                    PathTerm::new(kind, freq, c * C64::new(0.5, 0.0))
                }
            })
            .collect(),
        Some(x0) => {
            if !(x0 > 0.0 && x0 <= 1.0) {
                return Err(Error::Domain(format!("plateau {x0} must lie in (0, 1]")));
            }
            let mut poly = vec![ComplexMatrix::zeros(dim, dim); n_terms + 3];
            let mut add = |deg: usize, c: &ComplexMatrix, w: f64| {
                poly[deg] += c * C64::new(w / x0.powi(deg as i32), 0.0);
            };
            add(0, &coeffs[0], 1.0);
            if n_terms > 1 {
                add(2, &coeffs[1], 3.0);
                add(3, &coeffs[1], -2.0);
            }
            for (k, c) in coeffs.iter().enumerate().skip(2) {
                // u^k (1 - u)^2 = u^k - 2 u^{k+1} + u^{k+2}
                add(k, c, 1.0);
                add(k + 1, c, -2.0);
                add(k + 2, c, 1.0);
            }
            poly.into_iter()
                .enumerate()
                .filter(|(_, c)| linalg::max_norm(c) > 0.0)
                .map(|(deg, c)| PathTerm::new(TermKind::Poly, deg as f64, c))
                .collect()
        }
    };
    let path = MatrixPath::new(0.0, 1.0, terms, plateau)?;
    path.validate(64, 1e-8)?;
    Ok(path)
}

/// Random Hermitian path on the circle `[0, 2 pi]` with integer frequencies.
pub fn generate_periodic_path(seed: u64, dim: usize, n_terms: usize) -> Result<MatrixPath> {
    if n_terms == 0 || dim == 0 {
        return Err(Error::InfeasibleRequest("a path needs at least one term and positive dimension".into()));
    }
    let mut rng = rng_for(seed);
    let terms = (0..n_terms)
        .map(|k| {
            let c = random_hermitian(&mut rng, dim);
            match k {
                0 => PathTerm::new(TermKind::Poly, 0.0, c),
                _ => {
                    let kind = if k % 2 == 1 { TermKind::Cos } else { TermKind::Sin };
                    PathTerm::new(kind, ((k + 1) / 2) as f64, c * C64::new(0.5, 0.0))
                }
            }
        })
        .collect();
    let path = MatrixPath::new(0.0, 2.0 * std::f64::consts::PI, terms, None)?;
    path.validate(64, 1e-8)?;
    Ok(path)
}
