use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffKind {
    /// `C^infinity` transition built from `exp(-1/u)`.
    SmoothBump,
    /// Quintic smoothstep transition (`C^2`).
    IndicatorWithSmoothing,
}

/// A cutoff `phi` equal to 1 on `[0, flat]` and vanishing beyond `support`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffFunction {
    pub kind: CutoffKind,
    pub flat: f64,
    pub support: f64,
    integral: f64,
}

fn bump_h(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

impl CutoffFunction {
    pub fn new(kind: CutoffKind, flat: f64, support: f64) -> Result<Self> {
        if !(flat > 0.0 && support > flat && support.is_finite()) {
            return Err(Error::Domain(format!("cutoff needs 0 < flat < support, got {flat}, {support}")));
        }
        let mut phi = CutoffFunction { kind, flat, support, integral: 0.0 };
        let tail = quad::adaptive(|x| phi.eval(x), flat, support, 1e-15, 1e-15);
        phi.integral = flat + tail.value;
        Ok(phi)
    }

    pub fn smooth_bump(flat: f64, support: f64) -> Result<Self> {
        Self::new(CutoffKind::SmoothBump, flat, support)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.flat {
            return 1.0;
        }
        if x >= self.support {
            return 0.0;
        }
        let u = (x - self.flat) / (self.support - self.flat);
        match self.kind {
            CutoffKind::SmoothBump => {
                let (a, b) = (bump_h(1.0 - u), bump_h(u));
                a / (a + b)
            }
            CutoffKind::IndicatorWithSmoothing => 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u),
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        1.0
    }

    /// `int_0^infinity phi(x) dx`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Breakpoints where `phi` changes regime.
    pub fn breaks(&self) -> [f64; 2] {
        [self.flat, self.support]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_integral() {
        for kind in [CutoffKind::SmoothBump, CutoffKind::IndicatorWithSmoothing] {
            let phi = CutoffFunction::new(kind, 2.0, 4.0).unwrap();
            assert_eq!(phi.eval(0.0), 1.0);
            assert_eq!(phi.eval(2.0), 1.0);
            assert_eq!(phi.eval(4.5), 0.0);
            // Both transitions are odd about the midpoint, so the integral is flat + half-width.
            assert!((phi.eval(3.0) - 0.5).abs() < 1e-15);
            assert!((phi.integral() - 3.0).abs() < 1e-12, "{kind:?}: {}", phi.integral());
            let mut prev = 1.0;
            for i in 0..=100 {
                let v = phi.eval(2.0 + 0.02 * i as f64);
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
        assert!(CutoffFunction::smooth_bump(1.0, 1.0).is_err());
    }
}
