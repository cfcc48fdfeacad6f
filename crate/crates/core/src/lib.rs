//! Numerical boundary-projection theory for Dirac-type model operators
//! `D = gamma (d/dx + A)` on a half-line or interval with finite-dimensional
//! coefficient space.

pub mod error;
pub mod linalg;
pub mod quad;
pub mod special;
pub mod heat;
pub mod interval;
pub mod glueing;
pub mod harness;
pub mod invariants;
pub mod structure;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, MatrixRecord, C64};
pub use structure::{
    aps_projection, fredholm_pair_index, is_gamma_symmetric, is_wellposed, spectral_factorize,
    spectral_projection, symmetric_extension_check, validate_structure, DiracStructure,
    HermitianOperator, OrthoProjection, SpectralData, SpectralWindow,
};
