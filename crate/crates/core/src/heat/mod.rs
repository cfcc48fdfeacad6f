//! Heat kernels and heat traces of `D_P^2 = -d^2/dx^2 + A^2` on the half-line.

mod circle;
mod cutoff;
pub mod fd;
mod fit;
mod kernel;
mod normal;
mod trace;
mod verify;

pub use cutoff::{CutoffFunction, CutoffKind};
pub use fd::{dense_spectrum, heat_trace_numeric, kernel_numeric, FdGrid, FdProblem, NumericTrace};
pub use kernel::{block_kernel, blocks, robin_correction, sommerfeld_kernel, sommerfeld_kernel_with, Block, BoundaryKind, CorrectionMethod};
pub use normal::{joint_components, Component};
pub use trace::{closed_form_lim, halfline_heat_trace, halfline_heat_trace_with_error, HeatTraceSamples, Provenance, TGrid};
pub use fit::{lim_extract, lim_extract_with_logs, ExpansionFit};
pub use verify::{expansion_fit_s8, oracle_check, verify_s5, OracleCheck, S5Report, S8Fit, S8Input, SignReading, LIM_ORDER, LOG_TOL, S5_TOL};
pub use circle::{circle_supertrace, circle_supertrace_raw, deficiency_indices, DeficiencyIndices};
