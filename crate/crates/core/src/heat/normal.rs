//! Joint eigenbasis of commuting Hermitian matrices and a projection.

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};

/// One joint eigenvector `v` with the eigenvalue of each matrix and whether `Pv = v`.
#[derive(Debug, Clone)]
pub struct Component {
    pub values: Vec<f64>,
    pub in_range: bool,
    pub vector: ComplexMatrix,
}

/// Joint eigenbasis of `mats` and `p`, which must pairwise commute.
///
/// A generic linear combination separates the joint eigenspaces; each
/// resulting eigenvector is then checked to be an eigenvector of every input.
pub fn joint_components(mats: &[&ComplexMatrix], p: &ComplexMatrix) -> Result<Vec<Component>> {
    let n = p.nrows();
    let weights = [1.0, 0.754_877_666_2, 0.569_840_290_9, 0.430_159_709_0, 0.324_717_957_2, 0.245_122_333_8];
    let scale = mats.iter().map(|m| linalg::max_norm(m)).fold(1.0f64, f64::max);
    let mut combo = p * C64::new(0.176_470_588_2 * scale, 0.0);
    for (k, m) in mats.iter().enumerate() {
        let w = weights[k % weights.len()] * (1.0 + 0.1 * (k / weights.len()) as f64);
        combo += *m * C64::new(w, 0.0);
    }
    let (_, mut vecs) = linalg::eigh(&combo)?;
    linalg::normalize_phases(&mut vecs);

    let tol = 1e-7 * scale;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let v = vecs.column(k).into_owned();
        let mut values = Vec::with_capacity(mats.len());
        for m in mats {
            let mv = *m * &v;
            let lam = (v.adjoint() * &mv)[(0, 0)].re;
            let res = (mv - &v * C64::new(lam, 0.0)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if res > tol {
                return Err(Error::NormalForm(format!("matrices do not share an eigenbasis (residual {res:.3e})")));
            }
            values.push(lam);
        }
        let pv = (v.adjoint() * p * &v)[(0, 0)].re;
        let in_range = if (pv - 1.0).abs() < 1e-6 {
            true
        } else if pv.abs() < 1e-6 {
            false
        } else {
            return Err(Error::NormalForm(format!("projection has diagonal value {pv:.3e} on a joint eigenvector")));
        };
        out.push(Component { values, in_range, vector: ComplexMatrix::from_column_slice(n, 1, v.as_slice()) });
    }
    Ok(out)
}
