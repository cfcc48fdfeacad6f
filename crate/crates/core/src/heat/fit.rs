use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::HeatTraceSamples;
use crate::error::{Error, Result};

/// Least-squares fit of `sum_{j,k} a_{jk} t^{j/2 - p} log^k t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub p: f64,
    pub order: usize,
    pub include_logs: bool,
    /// Coefficients keyed `"j,k"`.
    pub coeffs: BTreeMap<String, f64>,
    /// Largest misfit divided by the largest sample magnitude.
    pub residual: f64,
    /// Ratio of extreme singular values of the column-scaled design matrix.
    pub conditioning: f64,
    /// Coefficient of `t^0 log^0 t`, zero when the model has no such term.
    pub lim: f64,
    /// Error bar for `lim` from the least-squares residual and the sample errors.
    pub lim_error: f64,
}

impl ExpansionFit {
    pub fn coeff(&self, j: usize, k: usize) -> f64 {
        self.coeffs.get(&key(j, k)).copied().unwrap_or(0.0)
    }

    /// Model value at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        (0..=self.order)
            .map(|j| {
                let base = t.powf(j as f64 / 2.0 - self.p);
                self.coeff(j, 0) * base + if self.include_logs { self.coeff(j, 1) * base * t.ln() } else { 0.0 }
            })
            .sum()
    }

    /// Largest `|a_{j1}|` over the indices with `j/2 - p <= 0`.
    pub fn max_low_order_log(&self) -> f64 {
        (0..=self.order)
            .filter(|&j| j as f64 / 2.0 - self.p <= 1e-12)
            .map(|j| self.coeff(j, 1).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_log(&self) -> f64 {
        (0..=self.order).map(|j| self.coeff(j, 1).abs()).fold(0.0, f64::max)
    }
}

fn key(j: usize, k: usize) -> String {
    format!("{j},{k}")
}

/// Fits the small-`t` expansion and reads off its constant term.
///
/// The design matrix is assembled in `s = sqrt(t)`. Each row is multiplied by
/// `t^p` so that every sample carries the same relative weight, the columns are
/// scaled to unit norm and the system is solved by Householder QR.
pub fn lim_extract(samples: &HeatTraceSamples, p: f64, order: usize, include_logs: bool) -> Result<ExpansionFit> {
    lim_extract_with_logs(samples, p, order, include_logs.then_some(order))
}

/// As [`lim_extract`], with log columns only for `j <= log_order`.
pub fn lim_extract_with_logs(samples: &HeatTraceSamples, p: f64, order: usize, log_order: Option<usize>) -> Result<ExpansionFit> {
    let include_logs = log_order.is_some();
    let log_order = log_order.map_or(0, |l| l.min(order));
    // Columns: t^{j/2-p} for j = 0..=order, then the log columns for j = 0..=log_order.
    let n_logs = if include_logs { log_order + 1 } else { 0 };
    let ncols = order + 1 + n_logs;
    let needed = 2 * (order + 1);
    if samples.len() < needed {
        return Err(Error::InsufficientSamples { needed, got: samples.len() });
    }
    if !p.is_finite() {
        return Err(Error::Domain("leading order must be finite".into()));
    }
    let m = samples.len();
    let mut design = DMatrix::<f64>::zeros(m, ncols);
    let weights: Vec<f64> = samples.t_values.iter().map(|t| t.powf(p)).collect();
    for (i, &t) in samples.t_values.iter().enumerate() {
        let s = t.sqrt();
        let log_t = 2.0 * s.ln();
        for j in 0..=order {
            let base = s.powf(j as f64 - 2.0 * p) * weights[i];
            design[(i, j)] = base;
            if j < n_logs {
                design[(i, order + 1 + j)] = base * log_t;
            }
        }
    }
    let norms: Vec<f64> = (0..ncols).map(|c| design.column(c).norm()).collect();
    if norms.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
        return Err(Error::IllConditioned { cond: f64::INFINITY });
    }
    for (c, n) in norms.iter().enumerate() {
        design.column_mut(c).scale_mut(1.0 / n);
    }

    let sv = design.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let conditioning = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(conditioning <= 1e12) {
        return Err(Error::IllConditioned { cond: conditioning });
    }

    let y = DVector::from_iterator(m, samples.values.iter().zip(&weights).map(|(v, w)| v * w));
    let qr = design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    let solution = &r_inv * (q.transpose() * &y);
    let resid = &y - &design * &solution;

    let mut coeffs = BTreeMap::new();
    for j in 0..=order {
        coeffs.insert(key(j, 0), solution[j] / norms[j]);
        if j < n_logs {
            coeffs.insert(key(j, 1), solution[order + 1 + j] / norms[order + 1 + j]);
        }
    }

    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let max_resid = resid.amax();
    let residual = if scale > 0.0 { max_resid / scale } else { max_resid };

    let lim_index = (0..=order).find(|&j| (j as f64 - 2.0 * p).abs() < 1e-12);
    let (lim, lim_error) = match lim_index {
        Some(j) => {
            let col = j;
            // Row of the pseudo-inverse belonging to the constant column.
            let row = (&r_inv * q.transpose()).row(col).into_owned();
            let dof = (m - ncols).max(1) as f64;
            let sigma = resid.norm() / dof.sqrt();
            let from_noise = sigma * row.norm();
            let from_samples: f64 = row.iter().zip(&samples.est_errors).zip(&weights).map(|((r, e), w)| r.abs() * e * w).sum();
            (solution[col] / norms[col], (3.0 * from_noise + from_samples) / norms[col])
        }
        None => (0.0, 0.0),
    };
    Ok(ExpansionFit { p, order, include_logs, coeffs, residual, conditioning, lim, lim_error })
}
