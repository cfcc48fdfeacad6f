use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::kernel::{blocks, robin_correction, Block, BoundaryKind};
use super::CutoffFunction;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::quad;
use crate::structure::{is_gamma_symmetric, DiracStructure, OrthoProjection};

/// Geometric grid `t_i = t0 * rho^i`, `i = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub t0: f64,
    pub rho: f64,
    pub count: usize,
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid { t0: 0.5, rho: 0.65, count: 14 }
    }
}

impl TGrid {
    pub fn new(t0: f64, rho: f64, count: usize) -> Result<Self> {
        let g = TGrid { t0, rho, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite() && self.rho > 0.0 && self.rho < 1.0 && self.count > 0) {
            return Err(Error::Domain(format!("invalid t grid {self:?}")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.t0 * self.rho.powi(i as i32)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactBlock,
    Discretized,
}

/// Sampled values of a heat trace on a decreasing grid of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatTraceSamples {
    pub t_values: Vec<f64>,
    pub values: Vec<f64>,
    pub est_errors: Vec<f64>,
    pub provenance: Provenance,
}

impl HeatTraceSamples {
    pub fn new(t_values: Vec<f64>, values: Vec<f64>, est_errors: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if t_values.len() != values.len() || values.len() != est_errors.len() {
            return Err(Error::dims(format!("{} samples", t_values.len()), format!("{} values / {} errors", values.len(), est_errors.len())));
        }
        if t_values.windows(2).any(|w| !(w[1] < w[0])) || t_values.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Domain("sample times must be positive and strictly decreasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("heat trace samples"));
        }
        Ok(HeatTraceSamples { t_values, values, est_errors, provenance })
    }

    /// Samples `f` on the grid; `f` returns a value and its error estimate.
    pub fn sample(grid: &TGrid, provenance: Provenance, mut f: impl FnMut(f64) -> Result<(f64, f64)>) -> Result<Self> {
        grid.validate()?;
        let t_values = grid.values();
        let mut values = Vec::with_capacity(t_values.len());
        let mut errs = Vec::with_capacity(t_values.len());
        for &t in &t_values {
            let (v, e) = f(t)?;
            values.push(v);
            errs.push(e);
        }
        Self::new(t_values, values, errs, provenance)
    }

    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }

    /// CSV with columns `t, value, est_error, provenance`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "value", "est_error", "provenance"])?;
        let prov = match self.provenance {
            Provenance::ExactBlock => "exact-block",
            Provenance::Discretized => "discretized",
        };
        for i in 0..self.len() {
            out.write_record([
                format!("{:e}", self.t_values[i]),
                format!("{:e}", self.values[i]),
                format!("{:e}", self.est_errors[i]),
                prov.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Blocks of `(A, P)` merged by `(lambda, kind)` with their trace weights `v* W v`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct WeightedBlock {
    pub lambda: f64,
    pub kind: BoundaryKind,
    pub weight: f64,
}

pub(crate) fn weighted_blocks(bl: &[Block], weight_op: Option<&ComplexMatrix>) -> Vec<WeightedBlock> {
    let mut wb: Vec<WeightedBlock> = bl
        .iter()
        .map(|b| {
            let weight = match weight_op {
                Some(w) => (b.vector.adjoint() * w * &b.vector)[(0, 0)].re,
                None => 1.0,
            };
            WeightedBlock { lambda: b.lambda, kind: b.kind, weight }
        })
        .collect();
    wb.sort_by(|a, b| (a.kind as u8).cmp(&(b.kind as u8)).then(a.lambda.total_cmp(&b.lambda)));
    let mut merged: Vec<WeightedBlock> = Vec::new();
    for b in wb {
        match merged.last_mut() {
            Some(m) if m.kind == b.kind && (m.lambda - b.lambda).abs() <= 1e-12 * m.lambda.abs().max(1.0) => m.weight += b.weight,
            _ => merged.push(b),
        }
    }
    merged
}

/// Checks the preconditions shared by the trace evaluators and returns the blocks.
pub(crate) fn trace_blocks(s: &DiracStructure, p: &OrthoProjection, insert_omega: bool) -> Result<Vec<WeightedBlock>> {
    if p.dim() != s.dim() {
        return Err(Error::dims(format!("dim {}", s.dim()), format!("dim {}", p.dim())));
    }
    let sym = is_gamma_symmetric(p, s)?;
    if !sym.holds {
        return Err(Error::StructureViolation { identity: "gamma* P gamma - (I - P)", residual: sym.residual, tol: s.tol() });
    }
    let omega = if insert_omega {
        let w = s.omega().ok_or(Error::MissingGrading)?;
        let res = linalg::max_norm(&linalg::commutator(p.matrix(), w));
        if res > s.tol() {
            return Err(Error::CommutationViolation { what: "[P, omega]", residual: res });
        }
        Some(w)
    } else {
        None
    };
    let bl = blocks(s.a_matrix(), p, s.tol())?;
    Ok(weighted_blocks(&bl, omega))
}

/// `int_0^infinity phi(x) k(x, x, t) dx` for one scalar block, with its quadrature error.
pub(crate) fn block_trace(lambda: f64, kind: BoundaryKind, phi: &CutoffFunction, t: f64) -> (f64, f64) {
    let decay = (-t * lambda * lambda).exp();
    let bulk = decay * phi.integral() / (4.0 * PI * t).sqrt();
    let sign = match kind {
        BoundaryKind::Dirichlet => -1.0,
        BoundaryKind::Robin => 1.0,
    };
    let integrand = |x: f64| {
        let image = sign * decay * (-x * x / t).exp() / (4.0 * PI * t).sqrt();
        let corr = if kind == BoundaryKind::Robin { robin_correction(lambda, 2.0 * x, t) } else { 0.0 };
        phi.eval(x) * (image + corr)
    };
    let [flat, support] = phi.breaks();
    let mut breaks = vec![0.0, flat, support, 10.0 * t.sqrt()];
    if lambda != 0.0 {
        breaks.push(4.0 / lambda.abs());
        breaks.push(2.0 * t * lambda.abs());
    }
    breaks.retain(|&b| b >= 0.0 && b <= support);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let r = quad::adaptive_with_breaks(integrand, &breaks, 1e-14, 1e-13);
    (bulk + r.value, r.error + 1e-15 * bulk.abs())
}

/// `tr[phi omega e^{-t D_P^2}]` (or without `omega`) from the exact block kernels.
pub fn halfline_heat_trace(s: &DiracStructure, p: &OrthoProjection, phi: &CutoffFunction, insert_omega: bool, t: f64) -> Result<f64> {
    Ok(halfline_heat_trace_with_error(s, p, phi, insert_omega, t)?.0)
}

pub fn halfline_heat_trace_with_error(
    s: &DiracStructure,
    p: &OrthoProjection,
    phi: &CutoffFunction,
    insert_omega: bool,
    t: f64,
) -> Result<(f64, f64)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat trace needs t > 0, got {t}")));
    }
    let wb = trace_blocks(s, p, insert_omega)?;
    let (mut value, mut err) = (0.0, 0.0);
    for b in wb.iter().filter(|b| b.weight.abs() > 1e-14) {
        let (v, e) = block_trace(b.lambda, b.kind, phi, t);
        value += b.weight * v;
        err += b.weight.abs() * e;
    }
    Ok((value, err))
}

/// Constant term of the supertrace predicted block by block: each Dirichlet
/// block contributes `-w/4` and each Robin block `+w/4`.
pub fn closed_form_lim(s: &DiracStructure, p: &OrthoProjection, insert_omega: bool) -> Result<f64> {
    let wb = trace_blocks(s, p, insert_omega)?;
    Ok(wb
        .iter()
        .map(|b| match b.kind {
            BoundaryKind::Dirichlet => -0.25 * b.weight,
            BoundaryKind::Robin => 0.25 * b.weight,
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_block_matches_image_closed_form() {
        // With phi = 1 on [0, 4] the image integral is 1/4 up to e^{-16/t}.
        let phi = CutoffFunction::smooth_bump(4.0, 6.0).unwrap();
        for &t in &[0.05, 0.1, 0.5] {
            let (v, _) = block_trace(0.0, BoundaryKind::Dirichlet, &phi, t);
            let expected = phi.integral() / (4.0 * PI * t).sqrt() - 0.25;
            assert!((v - expected).abs() < 1e-12, "t = {t}: {v} vs {expected}");
        }
    }

    #[test]
    fn grid_and_samples() {
        let g = TGrid::default();
        let v = g.values();
        assert_eq!(v.len(), 14);
        assert!((v[1] - 0.325).abs() < 1e-15);
        assert!(TGrid::new(0.5, 1.0, 3).is_err());
        let s = HeatTraceSamples::sample(&g, Provenance::ExactBlock, |t| Ok((t, 0.0))).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,value,est_error,provenance\n"));
        assert_eq!(text.lines().count(), 15);
        assert!(HeatTraceSamples::new(vec![0.1, 0.2], vec![1.0, 1.0], vec![0.0, 0.0], Provenance::ExactBlock).is_err());
    }
}
