//! Dense real linear algebra: a row-major [`Matrix`], the matrix
//! exponential and its integrals, a Jacobi symmetric eigensolver and the
//! Riccati solve used by gain synthesis.

mod care;
mod eig;
mod expm;
mod matrix;

pub use care::{care_solve, controllability_margin, controllability_rank, is_controllable, lyapunov, riccati_lhs};
pub use eig::{sym_eig, SpectralResult};
pub use expm::{input_integral, mat_exp, norm_integral, zoh_pair};
pub use matrix::{axpy, dot, norm, sub, Matrix};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("negative duration {0}")]
    NegativeDuration(f64),
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("pair (A, B) is not controllable: rank {rank} < {n}")]
    Uncontrollable { rank: usize, n: usize },
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}
