//! Dense matrices, emulated-precision GEMM and the f64 eigen oracle.

mod eig;
mod gemm;
pub mod io;
mod matrix;
mod precision;

pub use eig::{eig_project, rel_error, rel_error_against, sym_eig, sym_eigenvalues, EigenDecomposition, JACOBI_MAX_N};
pub use gemm::{gemm, GemmCounter, GemmCounterGuard, GemmProduct};
pub use matrix::{symmetrize, Matrix, SymmetricMatrix};
pub use precision::{round_scalar, round_to_precision, Accumulate, Precision, PrecisionMode, RoundedMatrix, F16_MAX};
