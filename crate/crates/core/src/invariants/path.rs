use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, MatrixRecord, C64};
use crate::structure::HermitianOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Poly,
    Cos,
    Sin,
}

/// One coefficient `C f(x)` with `f` one of `x^k`, `cos(k x)`, `sin(k x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTerm {
    pub kind: TermKind,
    pub degree_or_freq: f64,
    pub matrix: ComplexMatrix,
}

impl PathTerm {
    pub fn new(kind: TermKind, degree_or_freq: f64, matrix: ComplexMatrix) -> Self {
        PathTerm { kind, degree_or_freq, matrix }
    }

    fn value(&self, x: f64) -> f64 {
        let k = self.degree_or_freq;
        match self.kind {
            TermKind::Poly => x.powi(k as i32),
            TermKind::Cos => (k * x).cos(),
            TermKind::Sin => (k * x).sin(),
        }
    }

    fn slope(&self, x: f64) -> f64 {
        let k = self.degree_or_freq;
        match self.kind {
            TermKind::Poly if k == 0.0 => 0.0,
            TermKind::Poly => k * x.powi(k as i32 - 1),
            TermKind::Cos => -k * (k * x).sin(),
            TermKind::Sin => k * (k * x).cos(),
        }
    }

    /// Upper bound of `|f'|` on `[a, b]`.
    fn slope_bound(&self, a: f64, b: f64) -> f64 {
        let k = self.degree_or_freq;
        match self.kind {
            TermKind::Poly if k == 0.0 => 0.0,
            TermKind::Poly => k * a.abs().max(b.abs()).powi(k as i32 - 1),
            TermKind::Cos | TermKind::Sin => k.abs(),
        }
    }
}

/// A Hermitian matrix family `A(x) = sum_k C_k f_k(x)` on `[a, b]` with exact derivative.
///
/// With a plateau `x0` the family is evaluated at `min(x, x0)`, so it is
/// constant for `x >= x0` and its derivative vanishes there.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    a: f64,
    b: f64,
    dim: usize,
    terms: Vec<PathTerm>,
    plateau_x0: Option<f64>,
}

impl MatrixPath {
    pub fn new(a: f64, b: f64, terms: Vec<PathTerm>, plateau_x0: Option<f64>) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!("path interval [{a}, {b}] must satisfy a < b")));
        }
        let dim = terms.first().map(|t| t.matrix.nrows()).ok_or_else(|| Error::Domain("path has no terms".into()))?;
        for t in &terms {
            linalg::require_square(&t.matrix, dim)?;
            linalg::check_finite(&t.matrix, "path coefficient")?;
            let k = t.degree_or_freq;
            if !k.is_finite() || (t.kind == TermKind::Poly && (k < 0.0 || k.fract() != 0.0)) {
                return Err(Error::Domain(format!("invalid degree_or_freq {k} for {:?} term", t.kind)));
            }
            let skew = linalg::max_norm(&(&t.matrix - t.matrix.adjoint()));
            if skew > 1e-10 * dim as f64 * (1.0 + linalg::max_norm(&t.matrix)) {
                return Err(Error::StructureViolation { identity: "path coefficient C - C*", residual: skew, tol: 1e-10 });
            }
        }
        if let Some(x0) = plateau_x0 {
            if !x0.is_finite() {
                return Err(Error::Domain("plateau must be finite".into()));
            }
        }
        Ok(MatrixPath { a, b, dim, terms, plateau_x0 })
    }

    pub fn constant(a_op: &ComplexMatrix, a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, vec![PathTerm::new(TermKind::Poly, 0.0, a_op.clone())], None)
    }

    /// `A(x) = A0 + x A1`.
    pub fn affine(a0: &ComplexMatrix, a1: &ComplexMatrix, a: f64, b: f64) -> Result<Self> {
        Self::new(
            a,
            b,
            vec![PathTerm::new(TermKind::Poly, 0.0, a0.clone()), PathTerm::new(TermKind::Poly, 1.0, a1.clone())],
            None,
        )
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[PathTerm] {
        &self.terms
    }

    pub fn plateau(&self) -> Option<f64> {
        self.plateau_x0
    }

    fn effective(&self, x: f64) -> f64 {
        match self.plateau_x0 {
            Some(x0) => x.min(x0),
            None => x,
        }
    }

    pub fn eval(&self, x: f64) -> ComplexMatrix {
        let xe = self.effective(x);
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            m += &t.matrix * C64::new(t.value(xe), 0.0);
        }
        m
    }

    /// `sum_k c_k f_k(x)` with the coefficient matrices replaced by scalars `c`.
    pub fn eval_scalar(&self, coeffs: &[f64], x: f64) -> f64 {
        let xe = self.effective(x);
        self.terms.iter().zip(coeffs).map(|(t, c)| c * t.value(xe)).sum()
    }

    pub fn derivative(&self, x: f64) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        if matches!(self.plateau_x0, Some(x0) if x > x0) {
            return m;
        }
        for t in &self.terms {
            m += &t.matrix * C64::new(t.slope(x), 0.0);
        }
        m
    }

    pub fn eval_op(&self, x: f64) -> HermitianOperator {
        HermitianOperator::from_hermitian_part(&self.eval(x))
    }

    pub fn derivative_op(&self, x: f64) -> HermitianOperator {
        HermitianOperator::from_hermitian_part(&self.derivative(x))
    }

    /// Lipschitz bound `sup ||A'(x)||_2` over `[lo, hi]` from the coefficient table.
    pub fn lipschitz_bound(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (self.effective(lo), self.effective(hi));
        self.terms
            .iter()
            .map(|t| t.slope_bound(lo, hi) * linalg::hermitian_norm(&t.matrix).unwrap_or(f64::INFINITY))
            .sum()
    }

    /// True when every coefficient has no `x` dependence.
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| {
            (t.kind == TermKind::Poly && t.degree_or_freq == 0.0)
                || (t.kind != TermKind::Poly && t.degree_or_freq == 0.0)
                || linalg::max_norm(&t.matrix) == 0.0
        })
    }

    pub fn with_interval(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, self.terms.clone(), self.plateau_x0)
    }

    /// `x -> -A(x)`.
    pub fn negated(&self) -> Self {
        let terms = self.terms.iter().map(|t| PathTerm { matrix: -&t.matrix, ..t.clone() }).collect();
        MatrixPath { terms, ..self.clone() }
    }

    /// `x -> W* A(x) W` for a matrix `W` with orthonormal columns.
    pub fn compress(&self, w: &ComplexMatrix) -> Result<Self> {
        if w.nrows() != self.dim {
            return Err(Error::dims(format!("{} rows", self.dim), format!("{} rows", w.nrows())));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| PathTerm { matrix: linalg::hermitian_part(&(w.adjoint() * &t.matrix * w)), ..t.clone() })
            .collect();
        Ok(MatrixPath { dim: w.ncols(), terms, ..self.clone() })
    }

    /// `x -> A(a + b - x)` on the same interval, rewritten in the same term basis.
    pub fn reversed(&self) -> Result<Self> {
        if self.plateau_x0.is_some() {
            return Err(Error::Domain("reversal of plateau paths is not representable".into()));
        }
        let c = self.a + self.b;
        let mut terms = Vec::new();
        for t in &self.terms {
            let k = t.degree_or_freq;
            match t.kind {
                TermKind::Poly => {
                    // (c - x)^k = sum_j binom(k, j) c^(k-j) (-x)^j
                    let k = k as i32;
                    let mut binom = 1.0;
                    for j in 0..=k {
                        let coef = binom * c.powi(k - j) * if j % 2 == 0 { 1.0 } else { -1.0 };
                        terms.push(PathTerm::new(TermKind::Poly, j as f64, &t.matrix * C64::new(coef, 0.0)));
                        binom = binom * (k - j) as f64 / (j + 1) as f64;
                    }
                }
                TermKind::Cos => {
                    let (s, co) = (k * c).sin_cos();
                    terms.push(PathTerm::new(TermKind::Cos, k, &t.matrix * C64::new(co, 0.0)));
                    terms.push(PathTerm::new(TermKind::Sin, k, &t.matrix * C64::new(s, 0.0)));
                }
                TermKind::Sin => {
                    let (s, co) = (k * c).sin_cos();
                    terms.push(PathTerm::new(TermKind::Cos, k, &t.matrix * C64::new(s, 0.0)));
                    terms.push(PathTerm::new(TermKind::Sin, k, &t.matrix * C64::new(-co, 0.0)));
                }
            }
        }
        Self::new(self.a, self.b, terms, None)
    }

    /// Checks Hermiticity, the derivative table against central differences
    /// and the plateau on a uniform grid of `samples` points.
    pub fn validate(&self, samples: usize, tol: f64) -> Result<()> {
        let n = samples.max(2);
        let h = 1e-5 * (self.b - self.a);
        for i in 0..n {
            let x = self.a + (self.b - self.a) * i as f64 / (n - 1) as f64;
            let m = self.eval(x);
            let skew = linalg::max_norm(&(&m - m.adjoint()));
            if skew > tol * (1.0 + linalg::max_norm(&m)) {
                return Err(Error::StructureViolation { identity: "A(x) - A(x)*", residual: skew, tol });
            }
            let near_plateau = self.plateau_x0.is_some_and(|x0| (x - x0).abs() <= 2.0 * h);
            if !near_plateau {
                let fd = (self.eval(x + h) - self.eval(x - h)) / C64::new(2.0 * h, 0.0);
                let d = self.derivative(x);
                let scale = linalg::max_norm(&d).max(1.0);
                let res = linalg::max_norm(&(fd - &d));
                if res > 1e-6 * scale {
                    return Err(Error::StructureViolation { identity: "A'(x) vs central difference", residual: res, tol: 1e-6 * scale });
                }
            }
            if let Some(x0) = self.plateau_x0 {
                if x >= x0 {
                    let res = linalg::max_norm(&(&m - self.eval(x0)));
                    if res > tol {
                        return Err(Error::StructureViolation { identity: "plateau A(x) = A(x0)", residual: res, tol });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn record(&self) -> PathRecord {
        PathRecord {
            interval: [self.a, self.b],
            terms: self
                .terms
                .iter()
                .map(|t| TermRecord { kind: t.kind, degree_or_freq: t.degree_or_freq, matrix: MatrixRecord::from_matrix(&t.matrix) })
                .collect(),
            plateau_x0: self.plateau_x0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub kind: TermKind,
    pub degree_or_freq: f64,
    pub matrix: MatrixRecord,
}

/// JSON form of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub interval: [f64; 2],
    pub terms: Vec<TermRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau_x0: Option<f64>,
}

impl PathRecord {
    pub fn to_path(&self) -> Result<MatrixPath> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(PathTerm::new(t.kind, t.degree_or_freq, t.matrix.to_matrix()?)))
            .collect::<Result<Vec<_>>>()?;
        MatrixPath::new(self.interval[0], self.interval[1], terms, self.plateau_x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, real_matrix};

    fn trig_path() -> MatrixPath {
        MatrixPath::new(
            -0.5,
            1.5,
            vec![
                PathTerm::new(TermKind::Poly, 0.0, diag_real(&[0.3, -1.0])),
                PathTerm::new(TermKind::Poly, 2.0, real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])),
                PathTerm::new(TermKind::Cos, 2.5, diag_real(&[1.0, 0.5])),
                PathTerm::new(TermKind::Sin, 1.0, real_matrix(2, 2, &[0.2, 0.7, 0.7, -0.1])),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn derivative_matches_differences() {
        trig_path().validate(41, 1e-12).unwrap();
    }

    #[test]
    fn reversal_is_exact() {
        let p = trig_path();
        let r = p.reversed().unwrap();
        for i in 0..=20 {
            let x = -0.5 + 0.1 * i as f64;
            let diff = linalg::max_norm(&(r.eval(x) - p.eval(1.0 - x)));
            assert!(diff < 1e-12, "x = {x}: {diff}");
        }
        r.validate(21, 1e-12).unwrap();
    }

    #[test]
    fn plateau_freezes_the_path() {
        let p = MatrixPath::new(0.0, 3.0, trig_path().terms().to_vec(), Some(1.0)).unwrap();
        assert_eq!(p.eval(2.5), p.eval(1.0));
        assert_eq!(linalg::max_norm(&p.derivative(1.5)), 0.0);
        p.validate(31, 1e-12).unwrap();
        assert!(p.reversed().is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = trig_path();
        let json = serde_json::to_string(&p.record()).unwrap();
        assert!(json.contains("\"kind\":\"cos\""));
        let back: PathRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_path().unwrap(), p);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(MatrixPath::new(1.0, 0.0, trig_path().terms().to_vec(), None).is_err());
        let skew = real_matrix(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(MatrixPath::constant(&skew, 0.0, 1.0).is_err());
        let bad = vec![PathTerm::new(TermKind::Poly, 1.5, diag_real(&[1.0]))];
        assert!(MatrixPath::new(0.0, 1.0, bad, None).is_err());
    }

    #[test]
    fn lipschitz_bound_dominates_derivative() {
        let p = trig_path();
        let l = p.lipschitz_bound(-0.5, 1.5);
        for i in 0..=40 {
            let x = -0.5 + 0.05 * i as f64;
            assert!(linalg::hermitian_norm(&p.derivative(x)).unwrap() <= l + 1e-12);
        }
    }
}
