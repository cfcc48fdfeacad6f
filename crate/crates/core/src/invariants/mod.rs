//! Eta and xi invariants of Hermitian matrices and spectral flow of matrix paths.

mod flow;
mod path;

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::structure::HermitianOperator;

pub use flow::{spectral_flow, spectral_flow_with, Crossing, FlowOptions, FlowReport};
pub use path::{MatrixPath, PathRecord, PathTerm, TermKind};

/// An element of `Z/2`, stored as twice its value so arithmetic stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub fn from_twice(twice: i64) -> Self {
        HalfInt(twice)
    }

    pub fn from_int(n: i64) -> Self {
        HalfInt(2 * n)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// The integer value, if there is one.
    pub fn as_integer(self) -> Option<i64> {
        self.is_integer().then_some(self.0 / 2)
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 - o.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        let twice = 2.0 * v;
        if twice.fract() != 0.0 || !twice.is_finite() {
            return Err(serde::de::Error::custom(format!("{v} is not a half-integer")));
        }
        Ok(HalfInt(twice as i64))
    }
}

/// `sum over nonzero eigenvalues of sign(lambda) |lambda|^(-s)`.
pub fn eta_function(a: &HermitianOperator, s: f64) -> Result<f64> {
    let spec = a.spectral()?;
    Ok((0..spec.dim())
        .map(|k| spec.snapped(k))
        .filter(|&l| l != 0.0)
        .map(|l| l.signum() * l.abs().powf(-s))
        .sum())
}

/// `#positive - #negative` eigenvalues.
pub fn eta_invariant(a: &HermitianOperator) -> Result<i64> {
    let spec = a.spectral()?;
    Ok(spec.count_positive() as i64 - spec.count_negative() as i64)
}

/// `xi(A) = (eta(A) + dim ker A) / 2`.
pub fn xi_invariant(a: &HermitianOperator) -> Result<HalfInt> {
    let spec = a.spectral()?;
    let eta = spec.count_positive() as i64 - spec.count_negative() as i64;
    Ok(HalfInt::from_twice(eta + spec.kernel_dim() as i64))
}
