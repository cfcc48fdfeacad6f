use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{propagate_flow, segment_index, BoundaryIndex, Flow};
use crate::invariants::{xi_invariant, HalfInt, MatrixPath};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::structure::{fredholm_pair_index, spectral_projection, HermitianOperator, OrthoProjection, SpectralWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlueingKind {
    Circle,
    Interval,
}

/// Integer glueing identity `whole = left + right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlueingReport {
    pub kind: GlueingKind,
    /// How the pieces are identified with the two sides of the cut.
    pub header: String,
    pub cut: f64,
    pub whole: BoundaryIndex,
    pub left: BoundaryIndex,
    pub right: BoundaryIndex,
    pub residual: i64,
}

impl GlueingReport {
    pub fn holds(&self) -> bool {
        self.residual == 0
    }
}

/// Index of `d/dx + A` on `[a, b]` split at `cut`.
///
/// At the cut the left piece carries `R f(cut) = 0` and the right piece
/// `(I - R) f(cut) = 0`, the same pairing of `R` and `I - R` as on the circle.
pub fn glueing_check_interval(
    path: &MatrixPath,
    p0: &OrthoProjection,
    q0: &OrthoProjection,
    cut: f64,
    r: &OrthoProjection,
    tol: f64,
) -> Result<GlueingReport> {
    let (a, b) = path.interval();
    if !(cut >= a && cut <= b) {
        return Err(Error::Domain(format!("cut {cut} outside [{a}, {b}]")));
    }
    let whole = segment_index(path, a, b, p0, q0, tol)?;
    // The left piece ends with R f(cut) = 0, written (I - Q) f(cut) = 0 with Q = I - R.
    let rc = r.complement();
    let (left, right) = rayon::join(
        || segment_index(path, a, cut, p0, &rc, tol),
        || segment_index(path, cut, b, &rc, q0, tol),
    );
    let (left, right) = (left?, right?);
    Ok(GlueingReport {
        kind: GlueingKind::Interval,
        header: format!("[{a}, {b}] split at {cut}; R f(cut) = 0 ends the left piece, (I - R) f(cut) = 0 starts the right piece"),
        cut,
        residual: whole.index - left.index - right.index,
        whole,
        left,
        right,
    })
}

/// Periodic `d/dx + A` on the circle `[a, b]/(a ~ b)`, cut at `a` and at `cut`.
///
/// The circle index is `dim ker(T - 1) - dim ker(S - 1)` for the forward and
/// adjoint monodromies. The arc `[a, cut]` carries `P` at both ends and the arc
/// `[cut, b]` carries `I - P`, so that each cut point sees `P` from one side and
/// `I - P` from the other.
pub fn glueing_check_circle(path: &MatrixPath, p: &OrthoProjection, cut: f64, tol: f64) -> Result<GlueingReport> {
    let (a, b) = path.interval();
    let n = path.dim();
    let gap = linalg::max_norm(&(path.eval(a) - path.eval(b)));
    if gap > 1e-10 * linalg::max_norm(&path.eval(a)).max(1.0) {
        return Err(Error::Domain(format!("path is not periodic: |A(a) - A(b)| = {gap:.3e}")));
    }
    if !(cut > a && cut < b) {
        return Err(Error::Domain(format!("cut {cut} must lie inside ({a}, {b})")));
    }
    let ((fwd, adj), (left, right)) = rayon::join(
        || (propagate_flow(path, a, b, tol, Flow::Forward), propagate_flow(path, a, b, tol, Flow::Adjoint)),
        || {
            // (I - Q) f(cut) = 0 with Q = I - P is P f(cut) = 0.
            let q = p.complement();
            rayon::join(|| segment_index(path, a, cut, p, &q, tol), || segment_index(path, cut, b, &q, p, tol))
        },
    );
    let (fwd, adj, left, right) = (fwd?, adj?, left?, right?);
    let id = linalg::identity(n);
    let kernel_dim = linalg::nullity(&(&fwd.matrix - &id), DEFAULT_RANK_TOL);
    let cokernel_dim = linalg::nullity(&(&adj.matrix - &id), DEFAULT_RANK_TOL);
    let whole = BoundaryIndex {
        kernel_dim,
        cokernel_dim,
        index: kernel_dim as i64 - cokernel_dim as i64,
        steps: fwd.steps.max(adj.steps),
    };
    Ok(GlueingReport {
        kind: GlueingKind::Circle,
        header: format!(
            "circle [{a}, {b}]/(a ~ b) cut at {a} and {cut}; arc [{a}, {cut}] with P at both ends, arc [{cut}, {b}] with I - P at both ends"
        ),
        cut,
        residual: whole.index - left.index - right.index,
        whole,
        left,
        right,
    })
}

/// Every quantity of the two index chains for `(A+, P+)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostS9Report {
    /// `ind(P>=0(-A+), I - P+)`
    pub nonneg_of_negated: i64,
    /// `ind(I - P>0(A+), I - P+)`
    pub complement_of_positive: i64,
    /// `ind(P>0(A+), P+)`
    pub positive: i64,
    /// `ind(P>=0(A+), P+)`
    pub nonneg: i64,
    /// `ind(P>=0(A+), P>0(A+))`
    pub nonneg_vs_positive: i64,
    pub kernel_dim: usize,
    pub first_chain_holds: bool,
    pub second_chain_holds: bool,
    pub xi_negated: HalfInt,
    pub xi: HalfInt,
    /// `xi(-A+) + xi(A+) = dim ker A+`
    pub xi_identity_holds: bool,
}

impl PostS9Report {
    pub fn holds(&self) -> bool {
        self.first_chain_holds && self.second_chain_holds && self.xi_identity_holds
    }
}

pub fn post_s9_identities(a_plus: &HermitianOperator, p_plus: &OrthoProjection) -> Result<PostS9Report> {
    let n = a_plus.dim();
    if p_plus.dim() != n {
        return Err(Error::dims(format!("dim {n}"), format!("dim {}", p_plus.dim())));
    }
    let neg = a_plus.neg();
    let spec = a_plus.spectral()?;
    let nonneg_p = spectral_projection(&spec, &SpectralWindow::nonnegative());
    let pos_p = spectral_projection(&spec, &SpectralWindow::positive());
    let nonneg_neg_p = spectral_projection(&neg.spectral()?, &SpectralWindow::nonnegative());
    let q = p_plus.complement();

    let nonneg_of_negated = fredholm_pair_index(&nonneg_neg_p, &q)?;
    let complement_of_positive = fredholm_pair_index(&pos_p.complement(), &q)?;
    let positive = fredholm_pair_index(&pos_p, p_plus)?;
    let nonneg = fredholm_pair_index(&nonneg_p, p_plus)?;
    let nonneg_vs_positive = fredholm_pair_index(&nonneg_p, &pos_p)?;
    let kernel_dim = spec.kernel_dim();
    let xi_negated = xi_invariant(&neg)?;
    let xi = xi_invariant(a_plus)?;
    Ok(PostS9Report {
        first_chain_holds: nonneg_of_negated == complement_of_positive && complement_of_positive == -positive,
        second_chain_holds: nonneg == nonneg_vs_positive + positive && nonneg_vs_positive == kernel_dim as i64,
        xi_identity_holds: xi_negated + xi == HalfInt::from_int(kernel_dim as i64),
        nonneg_of_negated,
        complement_of_positive,
        positive,
        nonneg,
        nonneg_vs_positive,
        kernel_dim,
        xi_negated,
        xi,
    })
}
