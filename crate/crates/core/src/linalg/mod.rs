//! Dense and sparse linear algebra in `f64` with a fixed summation order.

mod csr;
mod dense;
mod power;

pub use csr::CsrMatrix;
pub use dense::DenseMatrix;
pub use power::{
    b_power_norm, b_power_norm_with, project_b, spectral_norm, spectral_norm_default,
    NormEstimate, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

pub(crate) use power::column_means;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidCsr(&'static str),
    #[error("{0}: empty matrix")]
    Empty(&'static str),
}

impl LinalgError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        LinalgError::Shape { op, left, right }
    }
}
