//! Scaled complementary error function.

use std::f64::consts::PI;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `erfcx(z) = exp(z^2) erfc(z)`, stable for large positive `z`.
pub fn erfcx(z: f64) -> f64 {
    if z < 26.0 {
        (z * z).exp() * libm::erfc(z)
    } else {
        erfcx_asymptotic(z)
    }
}

fn erfcx_asymptotic(z: f64) -> f64 {
    // Asymptotic series 1/(z sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2 z^2)^k.
    let inv = 1.0 / (2.0 * z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..10 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum / (z * PI.sqrt())
}
